#include "cht/eval/experiment.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "cht/error.hpp"
#include "cht/train/loss.hpp"

namespace cht::eval {

BenchmarkConfig::BenchmarkConfig() {
    scene.size_px = 128;
    scene.gedi_density = 0.05;
    scene.events = {{synth::EventKind::clear_cut, {40, 24, 32, 32}, 2021, 0.0},
                    {synth::EventKind::growth, {88, 72, 24, 32}, 2020, 1.0}};
    train.iterations = 1000;
    train.batch_size = 4;
    train.crop_px = 32;
    train.base_channels = 8;
    train.depth = 4;
    train.log_every = 50;
    train.max_shift_px = 0;
}

nlohmann::json benchmark_to_json(const BenchmarkConfig& c) {
    return {{"scene", synth::config_to_json(c.scene)},
            {"validation_seed_offset", c.validation_seed_offset},
            {"patch_px", c.patch_px},
            {"candidates_per_month", c.candidates_per_month},
            {"train", train::config_to_json(c.train)}};
}

BenchmarkConfig benchmark_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("benchmark", "expected a JSON object");
    BenchmarkConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "scene") {
            c.scene = synth::config_from_json(value);
        } else if (key == "train") {
            c.train = train::config_from_json(value);
        } else if (key == "validation_seed_offset" || key == "patch_px" || key == "candidates_per_month") {
            try {
                if (key == "validation_seed_offset") value.get_to(c.validation_seed_offset);
                if (key == "patch_px") value.get_to(c.patch_px);
                if (key == "candidates_per_month") value.get_to(c.candidates_per_month);
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(key, e.what());
            }
        } else {
            throw ConfigError(key, "unknown benchmark key");
        }
    }
    if (c.patch_px < 1 || c.scene.size_px % c.patch_px != 0) {
        throw ConfigError("patch_px", "must divide scene.size_px");
    }
    if (c.candidates_per_month < 1) throw ConfigError("candidates_per_month", "must be >= 1");
    return c;
}

SceneData build_scene_data(const synth::SceneConfig& scene, int patch_px, int candidates_per_month) {
    SceneData d;
    d.truth = synth::gen_truth(scene);
    d.patch_px = patch_px;
    for (int year : scene.years) {
        const auto product = synth::preprocess_year(d.truth, year, candidates_per_month);
        d.samples[year] = synth::cut_samples(product, patch_px, scene.seed);
    }
    return d;
}

namespace {

geodata::SampleArchive apply_subset(const geodata::SampleArchive& s, const InputSubset& subset) {
    auto out = subset.months.empty() ? s : preprocess::month_subset(s, subset.months);
    if (!subset.drop_bands.empty()) out = preprocess::band_subset(out, subset.drop_bands);
    return out;
}

const std::vector<geodata::SampleArchive>& year_samples(const SceneData& data, int year) {
    const auto it = data.samples.find(year);
    if (it == data.samples.end()) throw MissingDataError("no samples for year " + std::to_string(year));
    return it->second;
}

// Runs the model on each patch of a year; calls sink(row0, col0, predictions).
template <typename Sink>
void predict_patches(const nn::Checkpoint& model, const SceneData& data, preprocess::Variant v, int year,
                     const InputSubset& subset, Sink&& sink) {
    const int per_row = data.truth.size / data.patch_px;
    const auto& samples = year_samples(data, year);
    for (size_t k = 0; k < samples.size(); ++k) {
        const auto input = preprocess::build_model_input(apply_subset(samples[k], subset), v);
        const auto pred = train::predict(model.spec, model.params, input);
        sink(static_cast<int>(k) / per_row * data.patch_px, static_cast<int>(k) % per_row * data.patch_px, pred);
    }
}

}  // namespace

std::vector<train::Example> make_examples(const SceneData& data, preprocess::Variant v,
                                          const std::vector<int>& years, const InputSubset& subset) {
    std::vector<train::Example> out;
    for (int year : years) {
        for (const auto& s : year_samples(data, year)) out.push_back(train::make_example(apply_subset(s, subset), v));
    }
    return out;
}

std::map<int, YearPairs> dense_predictions(const nn::Checkpoint& model, const SceneData& data, preprocess::Variant v,
                                           const std::vector<int>& years, const InputSubset& subset) {
    std::map<int, YearPairs> out;
    const int p = data.patch_px;
    for (int year : years) {
        auto& pairs = out[year];
        predict_patches(model, data, v, year, subset, [&](int r0, int c0, const std::vector<float>& pred) {
            for (int r = 0; r < p; ++r) {
                for (int c = 0; c < p; ++c) {
                    pairs.preds.push_back(pred[static_cast<size_t>(r) * p + c]);
                    pairs.labels.push_back(data.truth.height(year, r0 + r, c0 + c));
                }
            }
        });
    }
    return out;
}

geodata::RasterPatch predict_map(const nn::Checkpoint& model, const SceneData& data, preprocess::Variant v, int year,
                                 const InputSubset& subset) {
    const int n = data.truth.size, p = data.patch_px;
    std::vector<float> values(static_cast<size_t>(n) * n, geodata::kNoData);
    predict_patches(model, data, v, year, subset, [&](int r0, int c0, const std::vector<float>& pred) {
        for (int r = 0; r < p; ++r)
            for (int c = 0; c < p; ++c) values[static_cast<size_t>(r0 + r) * n + c0 + c] = pred[static_cast<size_t>(r) * p + c];
    });
    const auto ref = data.truth.height_raster(year);
    return geodata::RasterPatch(ref.origin(), ref.resolution(), {"height"}, n, n, std::move(values));
}

std::string regime_name(Regime r) {
    switch (r) {
        case Regime::single2020: return "2020";
        case Regime::per_year: return "Year";
        case Regime::multi_year: return "MultiYear";
    }
    return "?";
}

namespace {

synth::SceneConfig scene_for(const BenchmarkConfig& cfg, uint64_t seed, bool validation) {
    auto s = cfg.scene;
    s.seed = cfg.scene.seed + seed + (validation ? cfg.validation_seed_offset : 0);
    return s;
}

nn::Checkpoint fit(const BenchmarkConfig& cfg, const SceneData& data, preprocess::Variant v,
                   const std::vector<int>& years, uint64_t seed, const InputSubset& subset = {}) {
    auto tc = cfg.train;
    tc.variant = v;
    tc.years = years;
    tc.seed = seed;
    return train::train(tc, make_examples(data, v, years, subset)).checkpoint;
}

}  // namespace

std::vector<EvalReport> run_config_benchmark(const BenchmarkConfig& cfg, const std::vector<preprocess::Variant>& variants,
                                             const std::vector<Regime>& regimes, uint64_t seed,
                                             const ProgressFn& progress) {
    const auto train_data = build_scene_data(scene_for(cfg, seed, false), cfg.patch_px, cfg.candidates_per_month);
    const auto val_data = build_scene_data(scene_for(cfg, seed, true), cfg.patch_px, cfg.candidates_per_month);
    const auto& years = cfg.scene.years;
    std::vector<EvalReport> out;
    for (auto v : variants) {
        for (auto regime : regimes) {
            const std::string id = preprocess::variant_name(v) + "-" + regime_name(regime);
            if (progress) progress("training " + id + " (seed " + std::to_string(seed) + ")");
            std::map<int, YearPairs> pairs;
            if (regime == Regime::per_year) {
                for (int y : years) {
                    const auto model = fit(cfg, train_data, v, {y}, seed);
                    pairs[y] = dense_predictions(model, val_data, v, {y}).at(y);
                }
            } else {
                const std::vector<int> train_years = regime == Regime::single2020 ? std::vector<int>{2020} : years;
                const auto model = fit(cfg, train_data, v, train_years, seed);
                pairs = dense_predictions(model, val_data, v, years);
            }
            out.push_back(build_report(id, pairs));
        }
    }
    return out;
}

std::vector<std::pair<std::string, InputSubset>> ablation_subsets() {
    return {{"Winter (Nov-Feb)", {{1, 2, 11, 12}, {}}},
            {"Summer (Jun-Sep)", {{6, 7, 8, 9}, {}}},
            {"Mixed (Jan-Feb, Aug-Sep)", {{1, 2, 8, 9}, {}}},
            {"All bands", {{}, {}}},
            {"Without B01/B09", {{}, {"B01", "B09"}}}};
}

std::vector<AblationRow> run_ablation(const BenchmarkConfig& cfg, preprocess::Variant variant, uint64_t seed,
                                      const ProgressFn& progress) {
    const auto train_data = build_scene_data(scene_for(cfg, seed, false), cfg.patch_px, cfg.candidates_per_month);
    const auto val_data = build_scene_data(scene_for(cfg, seed, true), cfg.patch_px, cfg.candidates_per_month);
    const auto& years = cfg.scene.years;
    std::vector<AblationRow> rows;
    for (const auto& [name, subset] : ablation_subsets()) {
        if (progress) progress("training " + name + " (seed " + std::to_string(seed) + ")");
        const auto model = fit(cfg, train_data, variant, years, seed, subset);
        double loss = 0.0, abs_err = 0.0;
        size_t n = 0;
        for (const auto& [year, p] : dense_predictions(model, val_data, variant, years, subset)) {
            for (size_t i = 0; i < p.preds.size(); ++i) {
                const double e = static_cast<double>(p.preds[i]) - p.labels[i];
                loss += train::huber(e, cfg.train.huber_delta);
                abs_err += std::abs(e);
                ++n;
            }
        }
        rows.push_back({name, subset, loss / static_cast<double>(n), abs_err / static_cast<double>(n)});
    }
    return rows;
}

nlohmann::json ablation_to_json(const std::vector<AblationRow>& rows) {
    auto out = nlohmann::json::array();
    for (const auto& r : rows) {
        out.push_back({{"name", r.name},
                       {"months", r.subset.months},
                       {"drop_bands", r.subset.drop_bands},
                       {"validation_loss", r.validation_loss},
                       {"mae", r.mae}});
    }
    return out;
}

std::string ablation_to_text(const std::vector<AblationRow>& rows) {
    std::ostringstream out;
    out << std::left << std::setw(28) << "Input" << std::right << std::setw(16) << "Validation loss" << std::setw(10)
        << "MAE" << '\n';
    out << std::fixed << std::setprecision(3);
    for (const auto& r : rows) {
        out << std::left << std::setw(28) << r.name << std::right << std::setw(16) << r.validation_loss << std::setw(10)
            << r.mae << '\n';
    }
    return out.str();
}

}  // namespace cht::eval
