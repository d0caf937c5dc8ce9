#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "cht/eval/report.hpp"
#include "cht/synth/dataset.hpp"
#include "cht/train/trainer.hpp"

namespace cht::eval {

// Desk-scale benchmark: a training scene and a held-out validation scene drawn from the same
// generator with different seeds.
struct BenchmarkConfig {
    synth::SceneConfig scene;
    uint64_t validation_seed_offset = 7919;
    int patch_px = 32;
    int candidates_per_month = 2;
    train::TrainConfig train;  // variant, years and seed are set per run

    BenchmarkConfig();
    bool operator==(const BenchmarkConfig&) const = default;
};

nlohmann::json benchmark_to_json(const BenchmarkConfig& c);
BenchmarkConfig benchmark_from_json(const nlohmann::json& j);

// Preprocessed samples and dense truth of one scene.
struct SceneData {
    synth::TruthField truth;
    std::map<int, std::vector<geodata::SampleArchive>> samples;  // per year, row-major patches
    int patch_px = 0;
};

SceneData build_scene_data(const synth::SceneConfig& scene, int patch_px, int candidates_per_month);

// Optional input restriction used by the ablation.
struct InputSubset {
    std::vector<int> months;              // empty keeps all twelve
    std::vector<std::string> drop_bands;  // optical bands to remove

    bool operator==(const InputSubset&) const = default;
};

std::vector<train::Example> make_examples(const SceneData& data, preprocess::Variant v,
                                          const std::vector<int>& years, const InputSubset& subset = {});

// Predicts every sample of `years` patch by patch and pairs the predictions with the dense
// truth heights (all pixels).
std::map<int, YearPairs> dense_predictions(const nn::Checkpoint& model, const SceneData& data,
                                           preprocess::Variant v, const std::vector<int>& years,
                                           const InputSubset& subset = {});

// Predicted height map of one year on the full scene grid, assembled from patches.
geodata::RasterPatch predict_map(const nn::Checkpoint& model, const SceneData& data, preprocess::Variant v,
                                 int year, const InputSubset& subset = {});

// Regimes of the multi-year comparison: one model on 2020, one model per year, one model
// on all years.
enum class Regime { single2020, per_year, multi_year };
std::string regime_name(Regime r);  // "2020", "Year", "MultiYear"

using ProgressFn = std::function<void(const std::string&)>;

// Trains and evaluates each (variant, regime) pair on dense truth of the validation scene.
// Report ids are "<variant>-<regime>".
std::vector<EvalReport> run_config_benchmark(const BenchmarkConfig& cfg, const std::vector<preprocess::Variant>& variants,
                                             const std::vector<Regime>& regimes, uint64_t seed,
                                             const ProgressFn& progress = {});

struct AblationRow {
    std::string name;
    InputSubset subset;
    double validation_loss = 0.0;  // mean Huber against dense validation truth
    double mae = 0.0;
};

// Month subsets Winter (Nov-Feb), Summer (Jun-Sep), Mixed (Jan-Feb, Aug-Sep) and band subsets
// with and without B01/B09, each a multi-year model of `variant`.
std::vector<std::pair<std::string, InputSubset>> ablation_subsets();
std::vector<AblationRow> run_ablation(const BenchmarkConfig& cfg, preprocess::Variant variant, uint64_t seed,
                                      const ProgressFn& progress = {});
nlohmann::json ablation_to_json(const std::vector<AblationRow>& rows);
std::string ablation_to_text(const std::vector<AblationRow>& rows);

}  // namespace cht::eval
