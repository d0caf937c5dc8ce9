#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cht/geodata/archive.hpp"
#include "cht/nn/unet.hpp"
#include "cht/preprocess/model_input.hpp"
#include "cht/train/loss.hpp"

namespace cht::train {

struct TrainConfig {
    double lr = 0.001;
    double weight_decay = 0.01;
    double clip_norm = 1.0;
    double warmup_frac = 0.10;
    int64_t iterations = 500;
    int batch_size = 16;
    double huber_delta = 1.0;
    int max_shift_px = 1;
    std::vector<int> years{2019, 2020, 2021, 2022};
    preprocess::Variant variant = preprocess::Variant::stack3d;
    uint64_t seed = 0;
    int crop_px = 16;
    int base_channels = 8;
    int depth = 4;
    int log_every = 10;

    bool operator==(const TrainConfig&) const = default;
};

// Throws ConfigError naming the offending key.
void validate_config(const TrainConfig& cfg);
nlohmann::json config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const nlohmann::json& j);

// One training sample as model input ([C, H, W] or [C, T, H, W]) plus its labels.
struct Example {
    std::string id;
    int year = 0;
    nn::Tensor input;
    std::vector<geodata::Label> labels;
};

Example make_example(const geodata::SampleArchive& sample, preprocess::Variant v);

// Network matching the examples' input layout.
nn::UNetSpec spec_for_examples(const TrainConfig& cfg, const std::vector<Example>& data);

struct LogRow {
    int64_t iter = 0;
    double lr = 0.0;
    double loss = 0.0;
};

struct TrainResult {
    nn::Checkpoint checkpoint;
    std::vector<double> losses;  // every iteration; NaN for skipped batches
    std::vector<double> plain_losses;  // unshifted masked Huber of the same batches
    std::vector<LogRow> log;     // every log_every iterations and the last one
    int skipped_batches = 0;
};

// Called after every iteration with (iter, loss, choices of that batch).
using IterationHook = std::function<void(int64_t, double, const std::vector<ShiftChoice>&)>;

// Seeded training loop: sample batch -> forward -> masked shift loss -> backward -> clip ->
// Adam with the warmup/decay schedule. Throws NumericError on a non-finite loss.
TrainResult train(const TrainConfig& cfg, const std::vector<Example>& data,
                  std::ostream* log_csv = nullptr, const IterationHook& hook = {});

// Full-extent prediction for a batch-less input, returned as [H, W] values.
std::vector<float> predict(const nn::UNetSpec& spec, const nn::Params& params, const nn::Tensor& input);

}  // namespace cht::train
