#include "cht/geodata/tile.hpp"

#include <cmath>
#include <string>

#include "cht/error.hpp"

namespace cht::geodata {

TileId tile_of_point(double easting, double northing, int zone) {
    if (zone < kMinZone || zone > kMaxZone) {
        throw DomainError("zone " + std::to_string(zone) + " outside [1, 120]");
    }
    if (!std::isfinite(easting) || !std::isfinite(northing)) {
        throw DomainError("tile_of_point: non-finite coordinate");
    }
    return TileId{zone,
                  static_cast<int64_t>(std::floor(easting / kTileSizeM)),
                  static_cast<int64_t>(std::floor(northing / kTileSizeM))};
}

std::pair<double, double> tile_corner(const TileId& tile) {
    return {static_cast<double>(tile.easting_idx) * kTileSizeM,
            static_cast<double>(tile.northing_idx) * kTileSizeM};
}

}  // namespace cht::geodata
