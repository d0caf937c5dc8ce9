#include "cht/synth/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "cht/error.hpp"
#include "cht/geodata/bands.hpp"
#include "cht/preprocess/imagery.hpp"

namespace cht::synth {

using geodata::RasterPatch;

namespace {

// Stream tags keep every random quantity independent of the others.
enum Stream : uint64_t {
    kForestMask = 1,
    kTypeField,
    kHeightField,
    kTexture,
    kGround,
    kUnderstory,
    kPhase,
    kYear,
    kMonth,
    kRadar,
    kGedi,
    kTrack,
};

std::mt19937_64 make_rng(uint64_t seed, uint64_t stream, uint64_t a = 0, uint64_t b = 0,
                         uint64_t c = 0) {
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                      static_cast<uint32_t>(stream), static_cast<uint32_t>(a),
                      static_cast<uint32_t>(b), static_cast<uint32_t>(c)};
    return std::mt19937_64(seq);
}

// Value noise: bilinear interpolation (smoothstep weights) of a random lattice with the given
// cell size, summed over two octaves and rescaled to [0, 1].
std::vector<float> smooth_field(std::mt19937_64 rng, int n, double cell) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> acc(static_cast<size_t>(n) * n, 0.0);
    double amp = 1.0;
    for (int octave = 0; octave < 2; ++octave, cell /= 2.0, amp /= 2.0) {
        const int g = static_cast<int>(std::ceil(n / cell)) + 2;
        std::vector<double> lattice(static_cast<size_t>(g) * g);
        for (auto& v : lattice) v = u(rng);
        for (int r = 0; r < n; ++r) {
            const double fy = (r + 0.5) / cell;
            const int iy = static_cast<int>(fy);
            double ty = fy - iy;
            ty = ty * ty * (3 - 2 * ty);
            for (int c = 0; c < n; ++c) {
                const double fx = (c + 0.5) / cell;
                const int ix = static_cast<int>(fx);
                double tx = fx - ix;
                tx = tx * tx * (3 - 2 * tx);
                const double v00 = lattice[iy * g + ix], v01 = lattice[iy * g + ix + 1];
                const double v10 = lattice[(iy + 1) * g + ix], v11 = lattice[(iy + 1) * g + ix + 1];
                const double top = v00 + (v01 - v00) * tx;
                const double bot = v10 + (v11 - v10) * tx;
                acc[static_cast<size_t>(r) * n + c] += amp * (top + (bot - top) * ty);
            }
        }
    }
    const auto [lo, hi] = std::minmax_element(acc.begin(), acc.end());
    const double span = *hi - *lo > 0 ? *hi - *lo : 1.0;
    std::vector<float> out(acc.size());
    for (size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>((acc[i] - *lo) / span);
    return out;
}

// Value at quantile q of `values` (nearest rank); q = 0 gives -inf so nothing is excluded.
float threshold_for_fraction(std::vector<float> values, double keep_fraction) {
    if (values.empty() || keep_fraction >= 1.0) return -INFINITY;
    if (keep_fraction <= 0.0) return INFINITY;
    std::sort(values.begin(), values.end());
    const auto k = static_cast<size_t>(std::llround((1.0 - keep_fraction) * values.size()));
    return k >= values.size() ? INFINITY : values[k];
}

struct BandResponse {
    double base;
    double slope;
};

// Order follows s2_band_names(). Red-edge/NIR bands brighten with canopy, visible and SWIR
// bands darken.
constexpr std::array<BandResponse, 12> kResponse{{{0.70, -0.35},
                                                  {0.68, -0.38},
                                                  {0.62, -0.30},
                                                  {0.72, -0.42},
                                                  {0.30, 0.25},
                                                  {0.22, 0.40},
                                                  {0.20, 0.45},
                                                  {0.18, 0.48},
                                                  {0.19, 0.47},
                                                  {0.25, 0.30},
                                                  {0.60, -0.30},
                                                  {0.66, -0.36}}};

constexpr double kCloudLevel = 1.25;  // cloud tops saturate every band above its divisor

double bilinear(const std::vector<float>& img, int n, double r, double c) {
    r = std::clamp(r, 0.0, n - 1.0);
    c = std::clamp(c, 0.0, n - 1.0);
    const int r0 = std::min(static_cast<int>(r), n - 2 < 0 ? 0 : n - 2);
    const int c0 = std::min(static_cast<int>(c), n - 2 < 0 ? 0 : n - 2);
    const double tr = r - r0, tc = c - c0;
    const int r1 = std::min(r0 + 1, n - 1), c1 = std::min(c0 + 1, n - 1);
    const double top = img[r0 * n + c0] + (img[r0 * n + c1] - img[r0 * n + c0]) * tc;
    const double bot = img[r1 * n + c0] + (img[r1 * n + c1] - img[r1 * n + c0]) * tc;
    return top + (bot - top) * tr;
}

}  // namespace

void validate_config(const SceneConfig& c) {
    auto fraction = [](double v, const char* key) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(key, "must lie in [0, 1]");
    };
    if (c.size_px < 32) throw ConfigError("size_px", "must be >= 32");
    if (c.years.empty()) throw ConfigError("years", "must not be empty");
    for (size_t i = 1; i < c.years.size(); ++i) {
        if (c.years[i] != c.years[i - 1] + 1) throw ConfigError("years", "must be contiguous and ascending");
    }
    fraction(c.forest_fraction, "forest_fraction");
    fraction(c.broadleaf_fraction, "broadleaf_fraction");
    fraction(c.cloud_prob, "cloud_prob");
    fraction(c.filter_fail_prob, "filter_fail_prob");
    if (!(c.geo_jitter_sigma >= 0.0)) throw ConfigError("geo_jitter_sigma", "must be >= 0");
    if (!(c.s2_noise >= 0.0)) throw ConfigError("s2_noise", "must be >= 0");
    if (!(c.s1_speckle >= 0.0)) throw ConfigError("s1_speckle", "must be >= 0");
    if (!(c.label_sigma >= 0.0)) throw ConfigError("label_sigma", "must be >= 0");
    if (!(c.gedi_density >= 0.0 && c.gedi_density <= 0.25)) {
        throw ConfigError("gedi_density", "must lie in [0, 0.25]");
    }
    if (!(c.track_offset_m >= 0.0)) throw ConfigError("track_offset_m", "must be >= 0");
    if (c.cloud_block_px < 1) throw ConfigError("cloud_block_px", "must be >= 1");
    if (c.s1_acquisitions < 1) throw ConfigError("s1_acquisitions", "must be >= 1");
    for (size_t i = 0; i < c.events.size(); ++i) {
        const auto& e = c.events[i];
        const std::string key = "events[" + std::to_string(i) + "]";
        if (e.region.h < 1 || e.region.w < 1 || e.region.row0 < 0 || e.region.col0 < 0 ||
            e.region.row0 + e.region.h > c.size_px || e.region.col0 + e.region.w > c.size_px) {
            throw ConfigError(key + ".region", "must lie inside the scene");
        }
        if (e.year < c.years.front() || e.year > c.years.back()) {
            throw ConfigError(key + ".year", "must lie within the configured years");
        }
        if (e.kind == EventKind::growth && !(e.magnitude >= 0.0)) {
            throw ConfigError(key + ".magnitude", "growth must be >= 0 m/yr");
        }
    }
}

nlohmann::json config_to_json(const SceneConfig& c) {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : c.events) {
        events.push_back({{"kind", e.kind == EventKind::clear_cut ? "clear_cut" : "growth"},
                          {"region", {e.region.row0, e.region.col0, e.region.h, e.region.w}},
                          {"year", e.year},
                          {"magnitude", e.magnitude}});
    }
    return {{"seed", c.seed},
            {"size_px", c.size_px},
            {"years", c.years},
            {"forest_fraction", c.forest_fraction},
            {"broadleaf_fraction", c.broadleaf_fraction},
            {"events", events},
            {"cloud_prob", c.cloud_prob},
            {"geo_jitter_sigma", c.geo_jitter_sigma},
            {"origin", {c.origin.easting, c.origin.northing}},
            {"cloud_block_px", c.cloud_block_px},
            {"s2_noise", c.s2_noise},
            {"calibration_spread", c.calibration_spread},
            {"s1_speckle", c.s1_speckle},
            {"s1_acquisitions", c.s1_acquisitions},
            {"label_sigma", c.label_sigma},
            {"gedi_density", c.gedi_density},
            {"track_offset_m", c.track_offset_m},
            {"grid_offsets", c.grid_offsets},
            {"filter_fail_prob", c.filter_fail_prob}};
}

SceneConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("scene", "expected a JSON object");
    SceneConfig c;
    auto get = [&](const char* key, auto& field) {
        if (!j.contains(key)) return;
        try {
            j.at(key).get_to(field);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(key, e.what());
        }
    };
    for (const auto& [key, value] : j.items()) {
        static const std::vector<std::string> known = {
            "seed", "size_px", "years", "forest_fraction", "broadleaf_fraction", "events",
            "cloud_prob", "geo_jitter_sigma", "origin", "cloud_block_px", "s2_noise",
            "calibration_spread", "s1_speckle", "s1_acquisitions", "label_sigma", "gedi_density",
            "track_offset_m", "grid_offsets", "filter_fail_prob"};
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError(key, "unknown scene key");
        }
    }
    get("seed", c.seed);
    get("size_px", c.size_px);
    get("years", c.years);
    get("forest_fraction", c.forest_fraction);
    get("broadleaf_fraction", c.broadleaf_fraction);
    get("cloud_prob", c.cloud_prob);
    get("geo_jitter_sigma", c.geo_jitter_sigma);
    get("cloud_block_px", c.cloud_block_px);
    get("s2_noise", c.s2_noise);
    get("calibration_spread", c.calibration_spread);
    get("s1_speckle", c.s1_speckle);
    get("s1_acquisitions", c.s1_acquisitions);
    get("label_sigma", c.label_sigma);
    get("gedi_density", c.gedi_density);
    get("track_offset_m", c.track_offset_m);
    get("grid_offsets", c.grid_offsets);
    get("filter_fail_prob", c.filter_fail_prob);
    if (j.contains("origin")) {
        std::array<double, 2> o{};
        get("origin", o);
        c.origin = {o[0], o[1]};
    }
    if (j.contains("events")) {
        for (size_t i = 0; i < j.at("events").size(); ++i) {
            const auto& ej = j.at("events")[i];
            const std::string key = "events[" + std::to_string(i) + "]";
            try {
                ChangeEvent e;
                const auto kind = ej.at("kind").get<std::string>();
                if (kind == "clear_cut") {
                    e.kind = EventKind::clear_cut;
                } else if (kind == "growth") {
                    e.kind = EventKind::growth;
                } else {
                    throw ConfigError(key + ".kind", "expected clear_cut or growth");
                }
                const auto r = ej.at("region").get<std::array<int, 4>>();
                e.region = {r[0], r[1], r[2], r[3]};
                e.year = ej.at("year").get<int>();
                e.magnitude = ej.value("magnitude", 0.0);
                c.events.push_back(e);
            } catch (const nlohmann::json::exception& ex) {
                throw ConfigError(key, ex.what());
            }
        }
    }
    validate_config(c);
    return c;
}

int TruthField::year_index(int year) const {
    auto it = std::find(years.begin(), years.end(), year);
    if (it == years.end()) throw DomainError("year " + std::to_string(year) + " is not in the scene");
    return static_cast<int>(it - years.begin());
}

RasterPatch TruthField::height_raster(int year) const {
    const auto& h = heights[year_index(year)];
    return RasterPatch(config.origin, 10.0, {"height"}, size, size, h);
}

RasterPatch TruthField::type_raster() const {
    std::vector<float> v(type.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(type[i]);
    return RasterPatch(config.origin, 10.0, {"forest_type"}, size, size, std::move(v));
}

TruthField gen_truth(const SceneConfig& config) {
    validate_config(config);
    const int n = config.size_px;
    const size_t np = static_cast<size_t>(n) * n;
    const uint64_t seed = config.seed;

    TruthField t;
    t.config = config;
    t.size = n;
    t.years = config.years;

    const auto mask_field = smooth_field(make_rng(seed, kForestMask), n, 24.0);
    const auto type_field = smooth_field(make_rng(seed, kTypeField), n, 20.0);
    const auto stand = smooth_field(make_rng(seed, kHeightField), n, 16.0);
    const auto texture = smooth_field(make_rng(seed, kTexture), n, 3.0);
    const auto ground = smooth_field(make_rng(seed, kGround), n, 6.0);
    t.understory = smooth_field(make_rng(seed, kUnderstory), n, 12.0);
    t.pixel_phase = smooth_field(make_rng(seed, kPhase), n, 12.0);
    for (auto& p : t.pixel_phase) p = static_cast<float>((p - 0.5) * config.calibration_spread);

    std::vector<bool> forest(np);
    const float mask_cut = threshold_for_fraction(mask_field, config.forest_fraction);
    for (size_t i = 0; i < np; ++i) forest[i] = mask_field[i] >= mask_cut;
    // Clear cuts happen in mature stands, so their regions are forest from the start.
    for (const auto& e : config.events) {
        if (e.kind != EventKind::clear_cut) continue;
        for (int r = e.region.row0; r < e.region.row0 + e.region.h; ++r) {
            for (int c = e.region.col0; c < e.region.col0 + e.region.w; ++c) forest[r * n + c] = true;
        }
    }

    std::vector<float> forest_types;
    for (size_t i = 0; i < np; ++i) {
        if (forest[i]) forest_types.push_back(type_field[i]);
    }
    const float broadleaf_cut = threshold_for_fraction(forest_types, 1.0 - config.broadleaf_fraction);

    std::vector<float> base(np);
    t.type.assign(np, ForestType::none);
    for (size_t i = 0; i < np; ++i) {
        if (forest[i]) {
            t.type[i] = type_field[i] >= broadleaf_cut ? ForestType::conifer : ForestType::broadleaf;
            base[i] = std::clamp(8.0f + 27.0f * stand[i] + 6.0f * (texture[i] - 0.5f), 3.0f, 60.0f);
        } else {
            base[i] = 1.5f * ground[i];
        }
    }
    for (const auto& e : config.events) {
        if (e.kind != EventKind::clear_cut) continue;
        for (int r = e.region.row0; r < e.region.row0 + e.region.h; ++r) {
            for (int c = e.region.col0; c < e.region.col0 + e.region.w; ++c) {
                auto& h = base[r * n + c];
                h = std::max(h, 15.0f + 10.0f * stand[r * n + c]);
            }
        }
    }

    for (int year : config.years) {
        std::vector<float> h = base;
        for (const auto& e : config.events) {
            if (year < e.year) continue;
            for (int r = e.region.row0; r < e.region.row0 + e.region.h; ++r) {
                for (int c = e.region.col0; c < e.region.col0 + e.region.w; ++c) {
                    auto& v = h[r * n + c];
                    if (e.kind == EventKind::clear_cut) {
                        v = 0.8f * ground[r * n + c];
                    } else {
                        v = std::min(60.0f, v + static_cast<float>(e.magnitude * (year - e.year + 1)));
                    }
                }
            }
        }
        t.heights.push_back(std::move(h));

        auto rng = make_rng(seed, kYear, static_cast<uint64_t>(year));
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        YearConditions yc;
        yc.gain = 1.0 + 0.08 * config.calibration_spread * u(rng);
        yc.offset = 0.02 * config.calibration_spread * u(rng);
        yc.phase_months = 0.75 * config.calibration_spread * u(rng);
        t.conditions.push_back(yc);
    }
    return t;
}

double leaf_factor(ForestType type, double month) {
    switch (type) {
        case ForestType::broadleaf:
            return std::max(0.0, std::cos(2.0 * std::numbers::pi * (month - 7.0) / 12.0));
        case ForestType::conifer: return 0.75;
        case ForestType::none: return 0.0;
    }
    return 0.0;
}

double s2_reflectance(int band, double height, ForestType type, double understory, double month,
                      const YearConditions& year, double pixel_phase) {
    const double canopy = std::min(height, 40.0) / 40.0;
    const double cover = canopy * leaf_factor(type, month - year.phase_months - pixel_phase);
    const auto& resp = kResponse[band];
    const double v = year.gain * (resp.base + resp.slope * (cover + 0.5 * understory)) + year.offset;
    return std::clamp(v, 0.0, 1.0);
}

MonthImage render_month(const TruthField& truth, int year, int month, int acquisition) {
    if (month < 1 || month > 12) throw DomainError("month must lie in 1..12");
    const int yi = truth.year_index(year);
    const auto& cfg = truth.config;
    const int n = truth.size;
    const size_t np = static_cast<size_t>(n) * n;
    const auto& heights = truth.heights[yi];
    const auto& yc = truth.conditions[yi];
    const auto& names = geodata::s2_band_names();
    const auto& table = preprocess::NormTable::sentinel2();

    auto rng = make_rng(cfg.seed, kMonth, static_cast<uint64_t>(year), static_cast<uint64_t>(month),
                        static_cast<uint64_t>(acquisition));
    std::normal_distribution<double> jitter(0.0, 1.0);
    const double dy = cfg.geo_jitter_sigma * jitter(rng) / 10.0;
    const double dx = cfg.geo_jitter_sigma * jitter(rng) / 10.0;

    const int blocks = (n + cfg.cloud_block_px - 1) / cfg.cloud_block_px;
    std::bernoulli_distribution cloudy(cfg.cloud_prob);
    std::vector<bool> cloud_block(static_cast<size_t>(blocks) * blocks);
    for (size_t i = 0; i < cloud_block.size(); ++i) cloud_block[i] = cloudy(rng);

    std::vector<float> ideal(np);
    std::vector<float> out(names.size() * np);
    std::normal_distribution<double> noise(0.0, 1.0);
    size_t cloud_pixels = 0;
    for (size_t b = 0; b < names.size(); ++b) {
        for (size_t i = 0; i < np; ++i) {
            ideal[i] = static_cast<float>(s2_reflectance(static_cast<int>(b), heights[i], truth.type[i],
                                                         truth.understory[i], month, yc,
                                                         truth.pixel_phase[i]));
        }
        const float divisor = table.divisor(names[b]);
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) {
                const size_t i = static_cast<size_t>(r) * n + c;
                double v;
                if (cloud_block[(r / cfg.cloud_block_px) * blocks + c / cfg.cloud_block_px]) {
                    v = kCloudLevel;
                    if (b == 0) ++cloud_pixels;
                } else {
                    // The scene is observed through a rigid shift of (dy, dx) pixels.
                    v = bilinear(ideal, n, r + dy, c + dx);
                    if (cfg.s2_noise > 0) {
                        // Gaussian truncated at 4 sigma.
                        double z;
                        do z = noise(rng); while (std::abs(z) > 4.0);
                        v = std::clamp(v + cfg.s2_noise * z, 0.0, 1.0);
                    }
                }
                out[b * np + i] = static_cast<float>(v * divisor);
            }
        }
    }
    MonthImage img;
    img.image = RasterPatch(cfg.origin, 10.0, names, n, n, std::move(out));
    img.cloud_fraction = static_cast<float>(static_cast<double>(cloud_pixels) / np);
    return img;
}

double s1_backscatter(int band, double height) {
    const double response = 1.0 - std::exp(-height / 12.0);
    const bool vh = band % 2 == 1;
    const double orbit = band >= 2 ? 0.4 : 0.0;
    return (vh ? -20.0 + 8.0 * response : -13.0 + 7.0 * response) + orbit;
}

std::vector<RasterPatch> render_s1_year(const TruthField& truth, int year) {
    const int yi = truth.year_index(year);
    const auto& cfg = truth.config;
    const int n = truth.size;
    const size_t np = static_cast<size_t>(n) * n;
    const auto& names = geodata::s1_band_names();
    std::vector<RasterPatch> out;
    for (int a = 0; a < cfg.s1_acquisitions; ++a) {
        auto rng = make_rng(cfg.seed, kRadar, static_cast<uint64_t>(year), static_cast<uint64_t>(a));
        std::exponential_distribution<double> intensity(1.0);
        std::vector<float> data(names.size() * np);
        for (size_t b = 0; b < names.size(); ++b) {
            for (size_t i = 0; i < np; ++i) {
                double v = s1_backscatter(static_cast<int>(b), truth.heights[yi][i]);
                // Multiplicative exponential speckle in dB; its median is zero.
                if (cfg.s1_speckle > 0) {
                    v += cfg.s1_speckle * 10.0 * std::log10(intensity(rng) / std::numbers::ln2);
                }
                data[b * np + i] = static_cast<float>(v);
            }
        }
        out.emplace_back(cfg.origin, 10.0, names, n, n, std::move(data));
    }
    return out;
}

std::pair<double, double> track_offset(const TruthField& truth, int track_id) {
    const auto& cfg = truth.config;
    auto rng = make_rng(cfg.seed, kTrack, static_cast<uint64_t>(track_id));
    const double b = cfg.track_offset_m;
    if (cfg.grid_offsets) {
        std::uniform_int_distribution<int> pick(-1, 1);
        const double east = b * pick(rng);
        const double north = b * pick(rng);
        return {east, north};
    }
    std::uniform_real_distribution<double> u(-b, b);
    const double east = u(rng);
    const double north = u(rng);
    return {east, north};
}

std::vector<preprocess::GediShot> sample_gedi(const TruthField& truth, int year) {
    const int yi = truth.year_index(year);
    const auto& cfg = truth.config;
    const int n = truth.size;
    const auto& h = truth.heights[yi];
    auto rng = make_rng(cfg.seed, kGedi, static_cast<uint64_t>(year));
    std::uniform_int_distribution<int> start(-n + 1, n - 1);
    std::uniform_int_distribution<int> phase(0, 3);
    std::bernoulli_distribution fails(cfg.filter_fail_prob);
    std::bernoulli_distribution coin(0.5);
    std::uniform_real_distribution<float> good_sens(0.9f, 1.0f), bad_sens(0.5f, 0.89f);
    std::uniform_int_distribution<int> power_beam(5, 8), coverage_beam(1, 4);
    std::normal_distribution<double> noise(0.0, 1.0);

    const double target = cfg.gedi_density * n * n;
    std::vector<preprocess::GediShot> shots;
    const RasterPatch grid(cfg.origin, 10.0, {"h"}, n, n, std::vector<float>(static_cast<size_t>(n) * n));
    int track = 0;
    while (static_cast<double>(shots.size()) < target) {
        const int track_id = (year % 10000) * 1000 + track++;
        if (track >= 1000) break;
        const auto [east, north] = track_offset(truth, track_id);
        // Diagonal ground track; footprints every 4 px along the diagonal (~57 m).
        const int dir = coin(rng) ? 1 : -1;
        const int c0 = dir > 0 ? start(rng) : start(rng) + n - 1;
        for (int r = phase(rng); r < n; r += 4) {
            const int c = c0 + dir * r;
            if (c < 0 || c >= n) continue;
            preprocess::GediShot s;
            const auto [e, nn] = grid.center_of(r, c);
            s.easting = e + east;
            s.northing = nn + north;
            s.rh_98 = static_cast<float>(std::max(0.0, h[r * n + c] + cfg.label_sigma * noise(rng)));
            s.quality_flag = !fails(rng);
            s.degrade_flag = fails(rng);
            s.sensitivity = fails(rng) ? bad_sens(rng) : good_sens(rng);
            s.beam_id = fails(rng) ? coverage_beam(rng) : power_beam(rng);
            if (fails(rng)) s.rh_98 = coin(rng) ? 100.0f + 50.0f * good_sens(rng) : -5.0f * good_sens(rng);
            s.track_id = track_id;
            s.year = year;
            shots.push_back(s);
        }
    }
    return shots;
}

}  // namespace cht::synth
