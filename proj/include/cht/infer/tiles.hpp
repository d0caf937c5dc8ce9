#pragma once

#include <map>
#include <vector>

namespace cht::infer {

struct TileWindow {
    int id = 0;
    int row0 = 0;
    int col0 = 0;
    int h = 0;
    int w = 0;
    // Core region in extent coordinates; cores partition the extent.
    int core_row0 = 0;
    int core_col0 = 0;
    int core_h = 0;
    int core_w = 0;

    bool operator==(const TileWindow&) const = default;
};

struct TilePlan {
    int height = 0;
    int width = 0;
    int window = 0;
    int margin = 0;
    std::vector<TileWindow> windows;  // row-major
};

// Full-size windows advancing by window - 2 * margin, the last row/column clamped inward.
// An extent smaller than the window gets a single window shrunk to the extent when the extent
// is a multiple of `multiple`; otherwise CapacityError.
TilePlan plan_tiles(int height, int width, int window = 256, int margin = 32, int multiple = 1);

// Copies each window's core from its output (h * w values, row-major) into the extent.
// Throws IncompleteError naming the missing window ids.
std::vector<float> stitch(const std::map<int, std::vector<float>>& outputs, const TilePlan& plan);

}  // namespace cht::infer
