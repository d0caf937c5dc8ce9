#pragma once

#include <string>
#include <vector>

#include "cht/geodata/archive.hpp"
#include "cht/preprocess/gedi.hpp"
#include "cht/preprocess/imagery.hpp"
#include "cht/synth/scene.hpp"

namespace cht::synth {

// One year of a scene after preprocessing: least-cloudy acquisition per month, radar median
// composite, normalization, and filtered GEDI labels on the full grid.
struct YearProduct {
    int year = 0;
    std::vector<geodata::RasterPatch> s2_months;  // normalized, Jan..Dec
    std::vector<float> cloud_fractions;
    geodata::RasterPatch s1;                      // normalized
    std::vector<geodata::Label> labels;
};

// Raw observations of one year as a sensor would deliver them.
struct RawYear {
    int year = 0;
    std::vector<std::vector<preprocess::MonthCandidate>> s2;  // per month, all acquisitions
    std::vector<geodata::RasterPatch> s1;                     // radar acquisitions, dB
    std::vector<preprocess::GediShot> shots;                  // unfiltered
};

RawYear render_year(const TruthField& truth, int year, int candidates_per_month);
YearProduct preprocess_raw(const RawYear& raw);
YearProduct preprocess_year(const TruthField& truth, int year, int candidates_per_month);

// Cuts a year product into square samples of patch_px (row-major patch order). Sample ids
// are "<year>_r<row>_c<col>" in patch units.
std::vector<geodata::SampleArchive> cut_samples(const YearProduct& product, int patch_px, uint64_t seed);

// Sample over an arbitrary window of the year product.
geodata::SampleArchive window_sample(const YearProduct& product, int row0, int col0, int h, int w,
                                     const std::string& id, uint64_t seed);

}  // namespace cht::synth
