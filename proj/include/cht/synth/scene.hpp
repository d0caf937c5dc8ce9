#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "cht/geodata/raster.hpp"
#include "cht/preprocess/gedi.hpp"

namespace cht::synth {

enum class ForestType : uint8_t { none = 0, broadleaf = 1, conifer = 2 };
enum class EventKind { clear_cut, growth };

struct Rect {
    int row0 = 0;
    int col0 = 0;
    int h = 0;
    int w = 0;

    bool contains(int r, int c) const { return r >= row0 && r < row0 + h && c >= col0 && c < col0 + w; }
    bool operator==(const Rect&) const = default;
};

struct ChangeEvent {
    EventKind kind = EventKind::clear_cut;
    Rect region;
    int year = 0;
    double magnitude = 0.0;  // growth in m/yr; unused for clear cuts

    bool operator==(const ChangeEvent&) const = default;
};

struct SceneConfig {
    uint64_t seed = 0;
    int size_px = 128;
    std::vector<int> years{2019, 2020, 2021, 2022};
    double forest_fraction = 0.6;
    double broadleaf_fraction = 0.5;
    std::vector<ChangeEvent> events;
    double cloud_prob = 0.2;
    double geo_jitter_sigma = 4.0;  // metres, per-month rigid shift

    geodata::Origin origin{500000.0, 5300000.0};
    int cloud_block_px = 8;
    double s2_noise = 0.01;          // std of additive noise on normalized reflectance
    double calibration_spread = 1.0;  // scales per-year gain/offset and phenology drift
    double s1_speckle = 1.0;         // 0 disables radar speckle
    int s1_acquisitions = 8;
    double label_sigma = 1.5;        // metres
    double gedi_density = 0.0015;    // recorded shots per pixel before filtering
    double track_offset_m = 10.0;    // bound of the per-track rigid offset
    bool grid_offsets = false;       // offsets drawn from {-b, 0, b}^2 instead of [-b, b]^2
    double filter_fail_prob = 0.05;  // per quality predicate

    bool operator==(const SceneConfig&) const = default;
};

// Throws ConfigError naming the offending key.
void validate_config(const SceneConfig& config);
nlohmann::json config_to_json(const SceneConfig& config);
SceneConfig config_from_json(const nlohmann::json& j);

// Per-year acquisition conditions shared by every pixel.
struct YearConditions {
    double gain = 1.0;
    double offset = 0.0;
    double phase_months = 0.0;
};

struct TruthField {
    SceneConfig config;
    int size = 0;
    std::vector<int> years;
    std::vector<std::vector<float>> heights;  // per year, row-major size x size
    std::vector<ForestType> type;
    std::vector<float> understory;            // background greenness in [0, 1]
    std::vector<float> pixel_phase;           // phenology offset in months
    std::vector<YearConditions> conditions;   // per year

    int year_index(int year) const;  // DomainError when absent
    float height(int year, int r, int c) const {
        return heights[year_index(year)][static_cast<size_t>(r) * size + c];
    }
    geodata::RasterPatch height_raster(int year) const;
    geodata::RasterPatch type_raster() const;
};

TruthField gen_truth(const SceneConfig& config);

// Noise-free normalized reflectance of optical band `band` (index into s2_band_names) for a
// pixel with the given canopy height, forest type and background, in a calendar month.
double s2_reflectance(int band, double height, ForestType type, double understory,
                      double month, const YearConditions& year, double pixel_phase);
// Leaf-on factor of the canopy in [0, 1].
double leaf_factor(ForestType type, double month);

struct MonthImage {
    geodata::RasterPatch image;  // raw reflectance-like values, Sentinel-2 scale
    float cloud_fraction = 0.0f;
};

// One optical acquisition. `acquisition` distinguishes several candidates within a month.
MonthImage render_month(const TruthField& truth, int year, int month, int acquisition = 0);

// Noise-free backscatter in dB for radar band index b (VV/VH x ascending/descending).
double s1_backscatter(int band, double height);
std::vector<geodata::RasterPatch> render_s1_year(const TruthField& truth, int year);

std::vector<preprocess::GediShot> sample_gedi(const TruthField& truth, int year);

// Rigid offset (east, north) in metres applied to a track's recorded positions.
std::pair<double, double> track_offset(const TruthField& truth, int track_id);

}  // namespace cht::synth
