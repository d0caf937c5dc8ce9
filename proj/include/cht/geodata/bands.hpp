#pragma once

#include <string>
#include <vector>

namespace cht::geodata {

// Sentinel-2 bands used as input: everything except the cirrus band B10.
inline const std::vector<std::string>& s2_band_names() {
    static const std::vector<std::string> names = {"B01", "B02", "B03", "B04", "B05", "B06",
                                                   "B07", "B08", "B8A", "B09", "B11", "B12"};
    return names;
}

// Sentinel-1 yearly composite channels: two polarisations x two orbit directions.
inline const std::vector<std::string>& s1_band_names() {
    static const std::vector<std::string> names = {"VV_ASC", "VH_ASC", "VV_DSC", "VH_DSC"};
    return names;
}

inline constexpr int kMonths = 12;

}  // namespace cht::geodata
