#include "cht/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "cht/error.hpp"
#include "cht/nn/ops.hpp"
#include "cht/train/optim.hpp"

namespace cht::train {

void validate_config(const TrainConfig& c) {
    if (!(c.lr > 0)) throw ConfigError("lr", "must be positive");
    if (!(c.weight_decay >= 0)) throw ConfigError("weight_decay", "must be >= 0");
    if (!(c.clip_norm > 0)) throw ConfigError("clip_norm", "must be positive");
    if (!(c.warmup_frac > 0 && c.warmup_frac < 1)) throw ConfigError("warmup_frac", "must lie in (0, 1)");
    if (c.iterations < 0) throw ConfigError("iterations", "must be >= 0");
    if (c.batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
    if (!(c.huber_delta > 0)) throw ConfigError("huber_delta", "must be positive");
    if (c.max_shift_px < 0) throw ConfigError("max_shift_px", "must be >= 0");
    if (c.years.empty()) throw ConfigError("years", "must not be empty");
    if (c.base_channels < 1) throw ConfigError("base_channels", "must be >= 1");
    if (c.depth < 2) throw ConfigError("depth", "must be >= 2");
    if (c.crop_px < 1 || c.crop_px % (1 << (c.depth - 1)) != 0) {
        throw ConfigError("crop_px", "must be a positive multiple of 2^(depth - 1)");
    }
    if (c.log_every < 1) throw ConfigError("log_every", "must be >= 1");
}

nlohmann::json config_to_json(const TrainConfig& c) {
    return {{"lr", c.lr},
            {"weight_decay", c.weight_decay},
            {"clip_norm", c.clip_norm},
            {"warmup_frac", c.warmup_frac},
            {"iterations", c.iterations},
            {"batch_size", c.batch_size},
            {"huber_delta", c.huber_delta},
            {"max_shift_px", c.max_shift_px},
            {"years", c.years},
            {"variant", preprocess::variant_name(c.variant)},
            {"seed", c.seed},
            {"crop_px", c.crop_px},
            {"base_channels", c.base_channels},
            {"depth", c.depth},
            {"log_every", c.log_every}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("train", "expected a JSON object");
    TrainConfig c;
    const auto defaults = config_to_json(c);
    for (const auto& [key, value] : j.items()) {
        if (!defaults.contains(key)) throw ConfigError(key, "unknown training key");
    }
    auto get = [&](const char* key, auto& field) {
        if (!j.contains(key)) return;
        try {
            j.at(key).get_to(field);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(key, e.what());
        }
    };
    get("lr", c.lr);
    get("weight_decay", c.weight_decay);
    get("clip_norm", c.clip_norm);
    get("warmup_frac", c.warmup_frac);
    get("iterations", c.iterations);
    get("batch_size", c.batch_size);
    get("huber_delta", c.huber_delta);
    get("max_shift_px", c.max_shift_px);
    get("years", c.years);
    get("seed", c.seed);
    get("crop_px", c.crop_px);
    get("base_channels", c.base_channels);
    get("depth", c.depth);
    get("log_every", c.log_every);
    if (j.contains("variant")) {
        std::string name;
        get("variant", name);
        c.variant = preprocess::variant_from_name(name);
    }
    validate_config(c);
    return c;
}

Example make_example(const geodata::SampleArchive& sample, preprocess::Variant v) {
    return Example{sample.patch_id, sample.year, preprocess::build_model_input(sample, v), sample.labels};
}

nn::UNetSpec spec_for_examples(const TrainConfig& cfg, const std::vector<Example>& data) {
    if (data.empty()) throw MissingDataError("no training examples");
    const auto& shape = data.front().input.shape();
    const bool is3d = cfg.variant == preprocess::Variant::stack3d;
    if (static_cast<int>(shape.size()) != (is3d ? 4 : 3)) {
        throw ConfigError("variant", "examples of shape " + nn::shape_str(shape) + " do not fit " +
                                         preprocess::variant_name(cfg.variant));
    }
    nn::UNetSpec spec;
    spec.variant = is3d ? nn::ConvKind::conv3d : nn::ConvKind::conv2d;
    spec.in_channels = static_cast<int>(shape[0]);
    spec.base_channels = cfg.base_channels;
    spec.depth = cfg.depth;
    spec.temporal_schedule =
        is3d ? preprocess::temporal_schedule_for(static_cast<int>(shape[1]), cfg.depth - 1) : std::vector<int>{};
    nn::validate_spec(spec);
    return spec;
}

namespace {

// Spatial crop of a batch-less input.
std::vector<float> crop_input(const nn::Tensor& x, int r0, int c0, int size) {
    const auto& s = x.shape();
    const int64_t H = s[s.size() - 2], W = s[s.size() - 1];
    int64_t planes = 1;
    for (size_t i = 0; i + 2 < s.size(); ++i) planes *= s[i];
    std::vector<float> out(static_cast<size_t>(planes * size * size));
    const auto d = x.data();
    for (int64_t p = 0; p < planes; ++p) {
        for (int r = 0; r < size; ++r) {
            const float* src = d.data() + (p * H + r0 + r) * W + c0;
            std::copy(src, src + size, out.begin() + (p * size + r) * size);
        }
    }
    return out;
}

// Starts the head at the mean label height. With zero biases the final ReLU often starts
// dead everywhere and passes no gradient.
void init_output_bias(nn::Params& params, const std::vector<Example>& data, const std::vector<int>& years) {
    double sum = 0.0;
    size_t n = 0;
    for (const auto& e : data) {
        if (std::find(years.begin(), years.end(), e.year) == years.end()) continue;
        for (const auto& l : e.labels) {
            sum += l.height;
            ++n;
        }
    }
    if (n == 0 || !params.contains("head.bias")) return;
    auto bias = params.get("head.bias");
    for (auto& b : bias.data()) b = static_cast<float>(sum / static_cast<double>(n));
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<Example>& data, std::ostream* log_csv,
                  const IterationHook& hook) {
    validate_config(cfg);
    std::map<int, std::vector<size_t>> by_year;
    for (size_t i = 0; i < data.size(); ++i) by_year[data[i].year].push_back(i);
    std::vector<int> years;
    for (int y : cfg.years) {
        if (!by_year.count(y)) {
            throw MissingDataError("no training examples for year " + std::to_string(y));
        }
        years.push_back(y);
    }
    const auto spec = spec_for_examples(cfg, data);
    const auto& ref_shape = data.front().input.shape();
    for (const auto& e : data) {
        if (e.input.shape() != ref_shape) {
            throw ShapeError("example " + e.id + " has shape " + nn::shape_str(e.input.shape()) +
                             ", expected " + nn::shape_str(ref_shape));
        }
    }
    const int H = static_cast<int>(ref_shape[ref_shape.size() - 2]);
    const int W = static_cast<int>(ref_shape[ref_shape.size() - 1]);
    const int crop = std::min({cfg.crop_px, H, W});
    if (crop % (1 << (cfg.depth - 1)) != 0) {
        throw ConfigError("crop_px", "examples of " + std::to_string(H) + "x" + std::to_string(W) +
                                         " are too small for the crop");
    }

    TrainResult result;
    result.checkpoint.spec = spec;
    result.checkpoint.params = nn::param_init<float>(spec, cfg.seed);
    result.checkpoint.meta = {{"train", config_to_json(cfg)}};
    auto& params = result.checkpoint.params;
    params.set_requires_grad(true);

    std::mt19937_64 rng(cfg.seed ^ 0x5bd1e995u);
    std::uniform_int_distribution<size_t> pick_year(0, years.size() - 1);
    std::uniform_int_distribution<int> pick_row(0, H - crop), pick_col(0, W - crop);
    AdamState adam;
    const AdamConfig adam_cfg{0.9, 0.999, 1e-8, cfg.weight_decay};
    if (log_csv) *log_csv << "iter,lr,loss\n";

    for (int64_t it = 0; it < cfg.iterations; ++it) {
        if (it == 0) init_output_bias(params, data, years);
        std::vector<nn::Tensor> items;
        SparseLabelBatch batch;
        std::vector<std::string> ids;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const auto& pool = by_year[years[pick_year(rng)]];
            std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
            const auto& ex = data[pool[pick(rng)]];
            const int r0 = pick_row(rng), c0 = pick_col(rng);
            auto shape = ex.input.shape();
            shape[shape.size() - 2] = crop;
            shape[shape.size() - 1] = crop;
            items.push_back(nn::Tensor::from(shape, crop_input(ex.input, r0, c0, crop)));
            std::vector<geodata::Label> labels;
            for (const auto& l : ex.labels) {
                if (l.row >= r0 && l.row < r0 + crop && l.col >= c0 && l.col < c0 + crop) {
                    labels.push_back({l.row - r0, l.col - c0, l.height, l.track_id});
                }
            }
            batch.labels.push_back(std::move(labels));
            batch.years.push_back(ex.year);
            ids.push_back(ex.id + "@" + std::to_string(r0) + "," + std::to_string(c0));
        }
        const double lr = lr_at(it, cfg.iterations, cfg.lr, cfg.warmup_frac);
        const auto x = preprocess::stack_batch(items);
        const auto pred = nn::unet_forward(spec, params, x);
        auto loss = masked_shift_loss(pred, batch, cfg.max_shift_px, cfg.huber_delta);
        if (loss.skip) {
            ++result.skipped_batches;
            result.losses.push_back(NAN);
            result.plain_losses.push_back(NAN);
            if (hook) hook(it, NAN, loss.choices);
            continue;
        }
        const double value = loss.loss.item();
        if (!std::isfinite(value)) {
            std::ostringstream msg;
            msg << "non-finite loss at iteration " << it << " (lr " << lr << "); batch:";
            for (const auto& id : ids) msg << ' ' << id;
            throw NumericError(msg.str());
        }
        params.zero_grad();
        nn::backward(loss.loss);
        clip_gradients(params, cfg.clip_norm);
        adam_step(params, adam, lr, adam_cfg);
        result.losses.push_back(value);
        result.plain_losses.push_back(masked_huber(pred, batch, cfg.huber_delta).loss.item());
        if (hook) hook(it, value, loss.choices);
        if (it % cfg.log_every == 0 || it == cfg.iterations - 1) {
            result.log.push_back({it, lr, value});
            if (log_csv) *log_csv << it << ',' << lr << ',' << value << '\n';
        }
    }
    params.set_requires_grad(false);
    return result;
}

std::vector<float> predict(const nn::UNetSpec& spec, const nn::Params& params, const nn::Tensor& input) {
    auto shape = input.shape();
    shape.insert(shape.begin(), 1);
    const auto x = nn::Tensor::from(shape, std::vector<float>(input.data().begin(), input.data().end()));
    const auto y = nn::unet_forward(spec, params, x);
    return std::vector<float>(y.data().begin(), y.data().end());
}

}  // namespace cht::train
