#pragma once

#include <compare>
#include <cstdint>
#include <utility>

namespace cht::geodata {

inline constexpr double kResolutionM = 10.0;
inline constexpr double kTileSizeM = 100000.0;
inline constexpr int64_t kTilePixels = 10000;
inline constexpr int kMinZone = 1;
inline constexpr int kMaxZone = 120;

// 100 km x 100 km grid cell inside one UTM-like zone.
struct TileId {
    int zone = 0;
    int64_t easting_idx = 0;
    int64_t northing_idx = 0;

    auto operator<=>(const TileId&) const = default;
};

// Tile containing (easting, northing). Cells are half-open [k*100 km, (k+1)*100 km),
// so a point on a shared edge belongs to the tile whose lower edge it lies on.
TileId tile_of_point(double easting, double northing, int zone);

// South-west corner of a tile in metres.
std::pair<double, double> tile_corner(const TileId& tile);

}  // namespace cht::geodata
