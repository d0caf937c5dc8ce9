#pragma once

#include <vector>

#include "cht/geodata/archive.hpp"
#include "cht/geodata/raster.hpp"

namespace cht::preprocess {

struct GediShot {
    double easting = 0.0;   // recorded footprint centre, metres
    double northing = 0.0;
    float rh_98 = 0.0f;
    int beam_id = 0;
    bool quality_flag = false;
    bool degrade_flag = false;
    float sensitivity = 0.0f;
    int track_id = 0;
    int year = 0;

    bool operator==(const GediShot&) const = default;
};

inline constexpr float kMinSensitivity = 0.9f;
inline constexpr int kMinPowerBeam = 5;
inline constexpr int kMaxPowerBeam = 8;
inline constexpr float kMaxPlausibleHeight = 100.0f;

bool passes_filter(const GediShot& shot);

// Keeps shots with a valid quality flag, no degradation, sensitivity >= 0.9, a power beam
// (5-8) and rh_98 in [0, 100]. Order is preserved.
std::vector<GediShot> filter_gedi(const std::vector<GediShot>& shots);

// One label per pixel containing a recorded footprint. When several shots land in one
// pixel the most sensitive wins (earliest on ties). Shots outside the grid are dropped.
// Output is sorted by (row, col).
std::vector<geodata::Label> rasterize_labels(const std::vector<GediShot>& shots,
                                             const geodata::RasterPatch& grid);

}  // namespace cht::preprocess
