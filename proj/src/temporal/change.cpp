#include "cht/temporal/change.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "cht/error.hpp"

namespace cht::temporal {

LossMask detect_loss(const geodata::RasterPatch& a, const geodata::RasterPatch& b, double hi, double lo) {
    if (!a.same_grid(b)) throw ShapeError("detect_loss: maps are not on the same grid");
    LossMask out;
    out.height = a.height();
    out.width = a.width();
    const auto da = a.band(0), db = b.band(0);
    out.mask.assign(da.size(), 0);
    for (size_t i = 0; i < da.size(); ++i) {
        if (da[i] == a.nodata() || db[i] == b.nodata()) continue;
        if (da[i] > hi && db[i] < lo) {
            out.mask[i] = 1;
            ++out.pixels;
        }
    }
    out.area_km2 = static_cast<double>(out.pixels) * a.resolution() * a.resolution() / 1e6;
    return out;
}

double mask_iou(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b) {
    if (a.size() != b.size()) throw ShapeError("mask_iou: masks differ in size");
    int64_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        inter += (a[i] && b[i]) ? 1 : 0;
        uni += (a[i] || b[i]) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<ChangePair> change_report(const std::vector<int>& years, const std::vector<geodata::RasterPatch>& maps,
                                      double hi, double lo) {
    if (years.size() != maps.size()) throw ShapeError("change_report: one map per year required");
    if (years.size() < 2) throw DomainError("change_report: need at least 2 years");
    std::vector<ChangePair> out;
    for (size_t i = 0; i + 1 < years.size(); ++i) {
        const auto m = detect_loss(maps[i], maps[i + 1], hi, lo);
        out.push_back({years[i], years[i + 1], m.pixels, m.area_km2});
    }
    return out;
}

nlohmann::json change_report_to_json(const std::vector<ChangePair>& pairs) {
    auto out = nlohmann::json::array();
    for (const auto& p : pairs) {
        out.push_back({{"from", p.from}, {"to", p.to}, {"pixels", p.pixels}, {"area_km2", p.area_km2}});
    }
    return out;
}

std::string change_report_to_text(const std::vector<ChangePair>& pairs) {
    std::ostringstream out;
    out << "period      pixels   area_km2\n";
    for (const auto& p : pairs) {
        out << p.from << "-" << p.to << "  " << std::setw(8) << p.pixels << "  " << std::fixed
            << std::setprecision(4) << std::setw(9) << p.area_km2 << '\n';
    }
    return out.str();
}

}  // namespace cht::temporal
