#include "cht/nn/unet.hpp"

#include <cmath>
#include <random>

#include "cht/bytes.hpp"
#include "cht/error.hpp"
#include "cht/nn/ops.hpp"

namespace cht::nn {

namespace {

constexpr char kCheckpointMagic[] = "CHTCKPT1";

struct LayerDesc {
    std::string name;
    Shape weight;
};

int temporal_kernel(int t) { return t > 1 ? 3 : 1; }

// Every convolution in the network, in checkpoint order.
std::vector<LayerDesc> layer_plan(const UNetSpec& spec) {
    const bool is3d = spec.variant == ConvKind::conv3d;
    const auto times = spec.time_at_levels();
    std::vector<LayerDesc> plan;
    auto conv_shape = [&](int64_t cout, int64_t cin, int kt, int k) -> Shape {
        return is3d ? Shape{cout, cin, kt, k, k} : Shape{cout, cin, k, k};
    };
    for (int l = 0; l < spec.depth; ++l) {
        const int64_t c = spec.channels_at(l);
        const int64_t cin = l == 0 ? spec.in_channels : spec.channels_at(l - 1);
        const int kt = temporal_kernel(times[l]);
        const std::string p = "enc" + std::to_string(l);
        plan.push_back({p + ".conv1", conv_shape(c, cin, kt, 3)});
        plan.push_back({p + ".conv2", conv_shape(c, c, kt, 3)});
        if (is3d && l < spec.depth - 1) {
            plan.push_back({"skip" + std::to_string(l), Shape{c, c, times[l], 3, 3}});
        }
    }
    for (int l = spec.depth - 2; l >= 0; --l) {
        const int64_t c = spec.channels_at(l);
        const std::string s = std::to_string(l);
        plan.push_back({"up" + s, Shape{c, spec.channels_at(l + 1), 3, 3}});
        plan.push_back({"dec" + s + ".conv1", Shape{c, 2 * c, 3, 3}});
        plan.push_back({"dec" + s + ".conv2", Shape{c, c, 3, 3}});
    }
    plan.push_back({"head", Shape{1, spec.channels_at(0), 1, 1}});
    return plan;
}

template <typename T>
BasicTensor<T> conv_layer(const BasicParams<T>& params, const std::string& name,
                          const BasicTensor<T>& x, const ConvParams& cp) {
    return conv(x, params.get(name + ".weight"), params.get(name + ".bias"), cp);
}

ConvParams same_padding(const Shape& w) {
    if (w.size() == 5) return ConvParams::same(static_cast<int>(w[2]), static_cast<int>(w[3]), static_cast<int>(w[4]));
    return ConvParams::same(1, static_cast<int>(w[2]), static_cast<int>(w[3]));
}

}  // namespace

int UNetSpec::time_steps() const {
    if (variant == ConvKind::conv2d) return 1;
    int t = 1;
    for (int f : temporal_schedule) t *= f;
    return t;
}

std::vector<int> UNetSpec::time_at_levels() const {
    std::vector<int> out(depth, 1);
    if (variant == ConvKind::conv2d) return out;
    int t = time_steps();
    for (int l = 0; l < depth; ++l) {
        out[l] = t;
        if (l < static_cast<int>(temporal_schedule.size())) t /= temporal_schedule[l];
    }
    return out;
}

void validate_spec(const UNetSpec& spec) {
    if (spec.depth < 2) throw ConfigError("depth", "must be >= 2");
    if (spec.in_channels < 1) throw ConfigError("in_channels", "must be >= 1");
    if (spec.base_channels < 1) throw ConfigError("base_channels", "must be >= 1");
    if (spec.variant == ConvKind::conv3d) {
        if (static_cast<int>(spec.temporal_schedule.size()) != spec.depth - 1) {
            throw ConfigError("temporal_schedule", "needs depth - 1 = " +
                                                       std::to_string(spec.depth - 1) + " entries");
        }
        for (int f : spec.temporal_schedule) {
            if (f < 1) throw ConfigError("temporal_schedule", "factors must be >= 1");
        }
    }
}

nlohmann::json spec_to_json(const UNetSpec& spec) {
    return {{"variant", spec.variant == ConvKind::conv3d ? "conv3d" : "conv2d"},
            {"in_channels", spec.in_channels},
            {"base_channels", spec.base_channels},
            {"depth", spec.depth},
            {"temporal_schedule", spec.temporal_schedule},
            {"with_final_relu", spec.with_final_relu}};
}

UNetSpec spec_from_json(const nlohmann::json& j) {
    UNetSpec s;
    const auto v = j.at("variant").get<std::string>();
    if (v == "conv3d") {
        s.variant = ConvKind::conv3d;
    } else if (v == "conv2d") {
        s.variant = ConvKind::conv2d;
    } else {
        throw ConfigError("variant", "unknown network variant '" + v + "'");
    }
    s.in_channels = j.at("in_channels").get<int>();
    s.base_channels = j.at("base_channels").get<int>();
    s.depth = j.at("depth").get<int>();
    s.temporal_schedule = j.at("temporal_schedule").get<std::vector<int>>();
    s.with_final_relu = j.at("with_final_relu").get<bool>();
    validate_spec(s);
    return s;
}

template <typename T>
void BasicParams<T>::add(std::string name, BasicTensor<T> tensor) {
    if (index_.count(name)) throw ConfigError(name, "duplicate parameter name");
    index_[name] = tensors_.size();
    names_.push_back(std::move(name));
    tensors_.push_back(std::move(tensor));
}

template <typename T>
const BasicTensor<T>& BasicParams<T>::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError(name, "parameter missing from checkpoint");
    return tensors_[it->second];
}

template <typename T>
int64_t BasicParams<T>::count() const {
    int64_t n = 0;
    for (const auto& t : tensors_) n += t.numel();
    return n;
}

template <typename T>
void BasicParams<T>::zero_grad() {
    for (auto& t : tensors_) t.zero_grad();
}

template <typename T>
void BasicParams<T>::set_requires_grad(bool on) {
    for (auto& t : tensors_) t.set_requires_grad(on);
}

template <typename T>
BasicParams<T> BasicParams<T>::clone() const {
    BasicParams out;
    for (size_t i = 0; i < tensors_.size(); ++i) {
        out.add(names_[i], BasicTensor<T>::from(tensors_[i].shape(),
                                                std::vector<T>(tensors_[i].data().begin(), tensors_[i].data().end()),
                                                tensors_[i].requires_grad()));
    }
    return out;
}

template <typename T>
BasicParams<T> param_init(const UNetSpec& spec, uint64_t seed) {
    validate_spec(spec);
    std::mt19937_64 rng(seed);
    BasicParams<T> params;
    for (const auto& layer : layer_plan(spec)) {
        const int64_t fan_in = numel(layer.weight) / layer.weight[0];
        const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        std::vector<T> w(static_cast<size_t>(numel(layer.weight)));
        for (auto& v : w) v = static_cast<T>(u(rng));
        params.add(layer.name + ".weight", BasicTensor<T>::from(layer.weight, std::move(w)));
        params.add(layer.name + ".bias", BasicTensor<T>::zeros({layer.weight[0]}));
    }
    return params;
}

template <typename T>
BasicTensor<T> unet_forward(const UNetSpec& spec, const BasicParams<T>& params,
                            const BasicTensor<T>& x, UNetTrace* trace) {
    validate_spec(spec);
    const bool is3d = spec.variant == ConvKind::conv3d;
    const int want_rank = is3d ? 5 : 4;
    if (x.rank() != want_rank || x.dim(1) != spec.in_channels) {
        throw ShapeError("unet_forward: input " + shape_str(x.shape()) + " does not match network (" +
                         std::to_string(want_rank) + "-D, " + std::to_string(spec.in_channels) +
                         " channels)");
    }
    if (is3d && x.dim(2) != spec.time_steps()) {
        throw ShapeError("unet_forward: input has " + std::to_string(x.dim(2)) +
                         " time steps, temporal schedule expects " + std::to_string(spec.time_steps()));
    }
    const int64_t factor = int64_t(1) << (spec.depth - 1);
    const int64_t H = x.dim(want_rank - 2), W = x.dim(want_rank - 1);
    if (H % factor || W % factor) {
        throw ShapeError("unet_forward: spatial size " + std::to_string(H) + "x" + std::to_string(W) +
                         " not divisible by " + std::to_string(factor));
    }
    const auto times = spec.time_at_levels();

    auto squeeze_time = [&](const BasicTensor<T>& t) {
        return reshape(t, Shape{t.dim(0), t.dim(1), t.dim(3), t.dim(4)});
    };

    BasicTensor<T> h = x;
    std::vector<BasicTensor<T>> skips;
    for (int l = 0; l < spec.depth; ++l) {
        const std::string p = "enc" + std::to_string(l);
        const auto cp = same_padding(params.get(p + ".conv1.weight").shape());
        h = relu(conv_layer(params, p + ".conv1", h, cp));
        h = relu(conv_layer(params, p + ".conv2", h, cp));
        if (trace) trace->encoder.push_back(h.shape());
        if (l == spec.depth - 1) break;
        if (is3d) {
            // Kernel spans all remaining time steps, so the skip has a single slice.
            const ConvParams cp_skip{{1, 1, 1}, {0, 1, 1}};
            auto s = relu(conv_layer(params, "skip" + std::to_string(l), h, cp_skip));
            skips.push_back(squeeze_time(s));
            h = max_pool(h, {spec.temporal_schedule[l], 2, 2});
        } else {
            skips.push_back(h);
            h = max_pool(h, {1, 2, 2});
        }
        if (trace) trace->skips.push_back(skips.back().shape());
    }
    if (is3d) {
        if (h.dim(2) != 1 || times.back() != 1) {
            throw ShapeError("unet_forward: bottleneck time length " + std::to_string(h.dim(2)) + " != 1");
        }
        if (trace) trace->bottleneck = h.shape();
        h = squeeze_time(h);
    } else if (trace) {
        trace->bottleneck = h.shape();
    }

    const ConvParams cp3 = ConvParams::same(1, 3, 3);
    for (int l = spec.depth - 2; l >= 0; --l) {
        const std::string s = std::to_string(l);
        h = relu(conv_layer(params, "up" + s, upsample_nearest(h, 2, 2), cp3));
        h = concat_channels(skips[l], h);
        h = relu(conv_layer(params, "dec" + s + ".conv1", h, cp3));
        h = relu(conv_layer(params, "dec" + s + ".conv2", h, cp3));
    }
    h = conv_layer(params, "head", h, ConvParams{});
    if (spec.with_final_relu) h = relu(h);
    return h;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    nlohmann::json header = {{"spec", spec_to_json(ckpt.spec)}, {"meta", ckpt.meta}};
    const std::string text = header.dump();
    ByteWriter w;
    w.put_string(std::string_view(kCheckpointMagic, 8));
    w.put<uint32_t>(static_cast<uint32_t>(text.size()));
    w.put_string(text);
    w.put<uint32_t>(static_cast<uint32_t>(ckpt.params.size()));
    for (size_t i = 0; i < ckpt.params.size(); ++i) {
        const auto& name = ckpt.params.names()[i];
        const auto& t = ckpt.params.tensors()[i];
        w.put<uint32_t>(static_cast<uint32_t>(name.size()));
        w.put_string(name);
        w.put<uint32_t>(static_cast<uint32_t>(t.rank()));
        for (auto d : t.shape()) w.put<uint64_t>(static_cast<uint64_t>(d));
        w.put_array(t.data());
    }
    write_file(path, w.bytes());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    ByteReader r(bytes, path.string());
    if (r.get_string(8) != std::string_view(kCheckpointMagic, 8)) {
        throw DecodeError(path.string() + ": not a checkpoint file");
    }
    Checkpoint ckpt;
    const auto len = r.get<uint32_t>();
    try {
        auto header = nlohmann::json::parse(r.get_string(len));
        ckpt.spec = spec_from_json(header.at("spec"));
        ckpt.meta = header.at("meta");
    } catch (const nlohmann::json::exception& e) {
        throw DecodeError(path.string() + ": bad checkpoint header: " + e.what());
    }
    const auto n = r.get<uint32_t>();
    for (uint32_t i = 0; i < n; ++i) {
        const auto name = r.get_string(r.get<uint32_t>());
        const auto rank = r.get<uint32_t>();
        Shape shape;
        for (uint32_t k = 0; k < rank; ++k) shape.push_back(static_cast<int64_t>(r.get<uint64_t>()));
        auto data = r.get_array<float>(static_cast<size_t>(numel(shape)));
        ckpt.params.add(name, Tensor::from(shape, std::move(data)));
    }
    // Every layer the spec needs must be present with the expected shape.
    for (const auto& layer : layer_plan(ckpt.spec)) {
        const auto& w = ckpt.params.get(layer.name + ".weight");
        if (w.shape() != layer.weight) {
            throw ConfigError(layer.name, "checkpoint weight shape " + shape_str(w.shape()) +
                                              " does not match spec " + shape_str(layer.weight));
        }
        ckpt.params.get(layer.name + ".bias");
    }
    return ckpt;
}

template class BasicParams<float>;
template class BasicParams<double>;
template BasicParams<float> param_init(const UNetSpec&, uint64_t);
template BasicParams<double> param_init(const UNetSpec&, uint64_t);
template BasicTensor<float> unet_forward(const UNetSpec&, const BasicParams<float>&,
                                         const BasicTensor<float>&, UNetTrace*);
template BasicTensor<double> unet_forward(const UNetSpec&, const BasicParams<double>&,
                                          const BasicTensor<double>&, UNetTrace*);

}  // namespace cht::nn
