#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cht/geodata/raster.hpp"

namespace cht::preprocess {

struct MonthCandidate {
    geodata::RasterPatch image;
    float cloud_fraction = 0.0f;
};

// candidates[m] holds the acquisitions of month m + 1 in acquisition order. Picks the
// least cloudy acquisition per month; the earliest wins ties.
std::vector<geodata::RasterPatch> select_monthly_best(
    const std::vector<std::vector<MonthCandidate>>& candidates);
// Index form of the same rule.
size_t best_candidate_index(std::span<const float> cloud_fractions);

// Band name -> divisor used to map reflectances into [0, 1].
class NormTable {
public:
    NormTable() = default;
    explicit NormTable(std::map<std::string, float> divisors);

    // The grouped Sentinel-2 divisors: B01 0.9e3; B02-B05 1.8e3; B06, B07, B11, B12 3.6e3;
    // B08, B8A, B09 5.4e3.
    static const NormTable& sentinel2();
    static NormTable from_json(const nlohmann::json& j);
    static NormTable load(const std::filesystem::path& path);
    nlohmann::json to_json() const;

    float divisor(const std::string& band) const;
    bool contains(const std::string& band) const { return divisors_.count(band) > 0; }
    const std::map<std::string, float>& divisors() const { return divisors_; }

private:
    std::map<std::string, float> divisors_;
};

float normalize_value(float value, float divisor);

// value / divisor clamped to [0, 1]. Throws SchemaError for bands missing from the table.
geodata::RasterPatch normalize_s2(const geodata::RasterPatch& patch, const NormTable& table);

// Backscatter in dB mapped by (dB + 30) / 30 and clamped to [0, 1].
geodata::RasterPatch normalize_s1(const geodata::RasterPatch& patch);

// Per-pixel, per-band median over the stack, ignoring nodata; an even count averages the two
// middle values. Throws ShapeError when geometries differ.
geodata::RasterPatch median_composite(std::span<const geodata::RasterPatch> stack);

}  // namespace cht::preprocess
