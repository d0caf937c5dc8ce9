#include "cht/preprocess/gedi.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace cht::preprocess {

bool passes_filter(const GediShot& shot) {
    return shot.quality_flag && !shot.degrade_flag && shot.sensitivity >= kMinSensitivity &&
           shot.beam_id >= kMinPowerBeam && shot.beam_id <= kMaxPowerBeam && shot.rh_98 >= 0.0f &&
           shot.rh_98 <= kMaxPlausibleHeight;
}

std::vector<GediShot> filter_gedi(const std::vector<GediShot>& shots) {
    std::vector<GediShot> out;
    std::copy_if(shots.begin(), shots.end(), std::back_inserter(out), passes_filter);
    return out;
}

std::vector<geodata::Label> rasterize_labels(const std::vector<GediShot>& shots,
                                             const geodata::RasterPatch& grid) {
    std::map<std::pair<long, long>, const GediShot*> best;
    for (const auto& shot : shots) {
        if (!std::isfinite(shot.easting) || !std::isfinite(shot.northing)) continue;
        const auto px = grid.pixel_of(shot.easting, shot.northing);
        if (!grid.contains(px.row, px.col)) continue;
        auto [it, inserted] = best.try_emplace({px.row, px.col}, &shot);
        if (!inserted && shot.sensitivity > it->second->sensitivity) it->second = &shot;
    }
    std::vector<geodata::Label> labels;
    labels.reserve(best.size());
    for (const auto& [rc, shot] : best) {
        labels.push_back(geodata::Label{static_cast<int>(rc.first), static_cast<int>(rc.second),
                                        shot->rh_98, shot->track_id});
    }
    return labels;
}

}  // namespace cht::preprocess
