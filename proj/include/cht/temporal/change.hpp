#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "cht/geodata/raster.hpp"

namespace cht::temporal {

inline constexpr double kLossHigh = 8.0;
inline constexpr double kLossLow = 5.0;

struct LossMask {
    std::vector<uint8_t> mask;  // row-major, 1 where height fell from above hi to below lo
    int height = 0;
    int width = 0;
    int64_t pixels = 0;
    double area_km2 = 0.0;
};

// mask = (a > hi) and (b < lo); nodata in either map never counts. Throws ShapeError when the
// maps are not on the same grid.
LossMask detect_loss(const geodata::RasterPatch& a, const geodata::RasterPatch& b, double hi = kLossHigh,
                     double lo = kLossLow);

// Intersection over union of two equally sized masks. Two empty masks give 1.
double mask_iou(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b);

struct ChangePair {
    int from = 0;
    int to = 0;
    int64_t pixels = 0;
    double area_km2 = 0.0;
};

// detect_loss for each consecutive pair of years, in order.
std::vector<ChangePair> change_report(const std::vector<int>& years, const std::vector<geodata::RasterPatch>& maps,
                                      double hi = kLossHigh, double lo = kLossLow);
nlohmann::json change_report_to_json(const std::vector<ChangePair>& pairs);
std::string change_report_to_text(const std::vector<ChangePair>& pairs);

}  // namespace cht::temporal
