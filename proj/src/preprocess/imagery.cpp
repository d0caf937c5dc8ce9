#include "cht/preprocess/imagery.hpp"

#include <algorithm>
#include <fstream>

#include "cht/error.hpp"
#include "cht/geodata/bands.hpp"

namespace cht::preprocess {

using geodata::RasterPatch;

size_t best_candidate_index(std::span<const float> cloud_fractions) {
    size_t best = 0;
    for (size_t i = 1; i < cloud_fractions.size(); ++i) {
        if (cloud_fractions[i] < cloud_fractions[best]) best = i;
    }
    return best;
}

std::vector<RasterPatch> select_monthly_best(
    const std::vector<std::vector<MonthCandidate>>& candidates) {
    if (candidates.size() != static_cast<size_t>(geodata::kMonths)) {
        throw MissingDataError("expected candidates for 12 months, got " +
                               std::to_string(candidates.size()));
    }
    std::vector<int> empty;
    for (int m = 0; m < geodata::kMonths; ++m) {
        if (candidates[m].empty()) empty.push_back(m + 1);
    }
    if (!empty.empty()) {
        std::string list;
        for (int m : empty) list += (list.empty() ? "" : ", ") + std::to_string(m);
        throw MissingDataError("no acquisition for month(s) " + list);
    }
    std::vector<RasterPatch> out;
    for (const auto& month : candidates) {
        std::vector<float> fractions;
        for (const auto& c : month) fractions.push_back(c.cloud_fraction);
        out.push_back(month[best_candidate_index(fractions)].image);
    }
    return out;
}

NormTable::NormTable(std::map<std::string, float> divisors) : divisors_(std::move(divisors)) {
    for (const auto& [band, d] : divisors_) {
        if (!(d > 0.0f)) throw ConfigError("divisors." + band, "divisor must be positive");
    }
}

const NormTable& NormTable::sentinel2() {
    static const NormTable table({{"B01", 900.0f},
                                  {"B02", 1800.0f},
                                  {"B03", 1800.0f},
                                  {"B04", 1800.0f},
                                  {"B05", 1800.0f},
                                  {"B06", 3600.0f},
                                  {"B07", 3600.0f},
                                  {"B11", 3600.0f},
                                  {"B12", 3600.0f},
                                  {"B08", 5400.0f},
                                  {"B8A", 5400.0f},
                                  {"B09", 5400.0f}});
    return table;
}

NormTable NormTable::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("divisors", "expected an object of band -> divisor");
    std::map<std::string, float> d;
    for (const auto& [band, value] : j.items()) {
        if (!value.is_number()) throw ConfigError("divisors." + band, "expected a number");
        d[band] = value.get<float>();
    }
    return NormTable(std::move(d));
}

NormTable NormTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingDataError("cannot open " + path.string());
    return from_json(nlohmann::json::parse(in));
}

nlohmann::json NormTable::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [band, d] : divisors_) j[band] = d;
    return j;
}

float NormTable::divisor(const std::string& band) const {
    auto it = divisors_.find(band);
    if (it == divisors_.end()) throw SchemaError("no normalization divisor for band " + band);
    return it->second;
}

float normalize_value(float value, float divisor) {
    const float v = value / divisor;
    if (!(v > 0.0f)) return 0.0f;  // also maps NaN to 0
    return v < 1.0f ? v : 1.0f;
}

RasterPatch normalize_s2(const RasterPatch& patch, const NormTable& table) {
    std::vector<float> divisors;
    for (const auto& b : patch.bands()) divisors.push_back(table.divisor(b));
    std::vector<float> data(patch.data().begin(), patch.data().end());
    const size_t plane = static_cast<size_t>(patch.height()) * patch.width();
    for (size_t b = 0; b < divisors.size(); ++b) {
        for (size_t i = b * plane; i < (b + 1) * plane; ++i) data[i] = normalize_value(data[i], divisors[b]);
    }
    return RasterPatch(patch.origin(), patch.resolution(), patch.bands(), patch.height(),
                       patch.width(), std::move(data), patch.nodata());
}

RasterPatch normalize_s1(const RasterPatch& patch) {
    std::vector<float> data(patch.data().begin(), patch.data().end());
    for (auto& v : data) v = normalize_value(v + 30.0f, 30.0f);
    return RasterPatch(patch.origin(), patch.resolution(), patch.bands(), patch.height(),
                       patch.width(), std::move(data), patch.nodata());
}

RasterPatch median_composite(std::span<const RasterPatch> stack) {
    if (stack.empty()) throw ShapeError("median_composite: empty stack");
    const auto& first = stack.front();
    for (size_t i = 1; i < stack.size(); ++i) {
        if (!stack[i].same_geometry(first) || stack[i].nodata() != first.nodata()) {
            throw ShapeError("median_composite: raster " + std::to_string(i) +
                             " does not match the geometry of raster 0");
        }
    }
    const float nodata = first.nodata();
    std::vector<float> out(first.data().size());
    std::vector<float> values;
    values.reserve(stack.size());
    for (size_t i = 0; i < out.size(); ++i) {
        values.clear();
        for (const auto& r : stack) {
            const float v = r.data()[i];
            if (v != nodata) values.push_back(v);
        }
        if (values.empty()) {
            out[i] = nodata;
            continue;
        }
        const size_t mid = values.size() / 2;
        std::nth_element(values.begin(), values.begin() + mid, values.end());
        if (values.size() % 2 == 1) {
            out[i] = values[mid];
        } else {
            const float hi = values[mid];
            const float lo = *std::max_element(values.begin(), values.begin() + mid);
            out[i] = static_cast<float>((static_cast<double>(lo) + hi) / 2.0);
        }
    }
    return RasterPatch(first.origin(), first.resolution(), first.bands(), first.height(),
                       first.width(), std::move(out), nodata);
}

}  // namespace cht::preprocess
