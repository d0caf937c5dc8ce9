#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cht/geodata/raster.hpp"
#include "cht/infer/tiles.hpp"
#include "cht/nn/unet.hpp"
#include "cht/preprocess/model_input.hpp"

namespace cht::infer {

struct PipelineConfig {
    int decoders = 1;
    int inferrers = 1;
    int window = 256;
    int margin = 32;
    preprocess::Variant variant = preprocess::Variant::stack3d;
    std::function<void(const std::string&)> progress;  // called from the writer thread
};

struct ArchiveResult {
    std::string patch_id;
    int year = 0;
    geodata::RasterPatch heights;  // one band "height" on the archive grid
};

struct PipelineStats {
    size_t queue_capacity = 0;
    size_t queue_high_water = 0;
    size_t windows = 0;
    double seconds = 0.0;
};

// Decode workers read archives and cut plan windows into a bounded queue (capacity
// 2 * inferrers); inference workers run the network on each window; one writer stitches the
// cores. Results follow the archive order and do not depend on the worker counts. A failing
// worker shuts the pipeline down and IncompleteError reports which archives finished.
std::vector<ArchiveResult> run_pipeline(const std::vector<std::filesystem::path>& archives,
                                        const nn::Checkpoint& checkpoint, const PipelineConfig& cfg,
                                        PipelineStats* stats = nullptr);

// Single-threaded reference with the same windows and stitching.
std::vector<ArchiveResult> run_sequential(const std::vector<std::filesystem::path>& archives,
                                          const nn::Checkpoint& checkpoint, const PipelineConfig& cfg);

}  // namespace cht::infer
