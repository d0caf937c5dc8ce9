#include "cht/cli/commands.hpp"

#include <openssl/evp.h>
#include <openssl/opensslv.h>
#include <zlib.h>

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "cht/error.hpp"
#include "cht/eval/experiment.hpp"
#include "cht/eval/report.hpp"
#include "cht/geodata/archive.hpp"
#include "cht/infer/pipeline.hpp"
#include "cht/synth/dataset.hpp"
#include "cht/temporal/change.hpp"
#include "cht/temporal/spline.hpp"
#include "cht/train/trainer.hpp"

namespace cht::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

void check_keys(const json& cfg, std::initializer_list<const char*> allowed) {
    if (!cfg.is_object()) throw ConfigError("config", "expected a JSON object");
    for (const auto& [key, value] : cfg.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            throw ConfigError(key, "unknown key");
        }
    }
}

template <typename T>
T get_or(const json& cfg, const char* key, T fallback) {
    if (!cfg.contains(key)) return fallback;
    try {
        return cfg.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(key, e.what());
    }
}

fs::path existing_path(const json& cfg, const char* key) {
    if (!cfg.contains(key)) throw ConfigError(key, "required");
    const fs::path p = get_or<std::string>(cfg, key, "");
    if (!fs::exists(p)) throw ConfigError(key, "path does not exist: " + p.string());
    return p;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw MissingDataError("cannot write " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<fs::path> archives_in(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".zip") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw MissingDataError("no .zip archives in " + dir.string());
    return out;
}

preprocess::Variant variant_of(const nn::Checkpoint& ckpt) {
    try {
        return preprocess::variant_from_name(ckpt.meta.at("train").at("variant").get<std::string>());
    } catch (const json::exception&) {
        throw SchemaError("checkpoint meta lacks train.variant");
    }
}

infer::PipelineConfig pipeline_config(const json& cfg, const nn::Checkpoint& ckpt, const Options& opt) {
    infer::PipelineConfig pc;
    pc.window = get_or(cfg, "window", pc.window);
    pc.margin = get_or(cfg, "margin", pc.margin);
    pc.decoders = opt.decoders;
    pc.inferrers = opt.inferrers;
    pc.variant = variant_of(ckpt);
    if (pc.window < 1) throw ConfigError("window", "must be >= 1");
    if (pc.margin < 0) throw ConfigError("margin", "must be >= 0");
    return pc;
}

std::string rel(const fs::path& p) { return p.lexically_normal().string(); }

json shot_to_json(const preprocess::GediShot& s) {
    return {{"easting", s.easting},       {"northing", s.northing},         {"rh_98", s.rh_98},
            {"beam_id", s.beam_id},       {"quality_flag", s.quality_flag}, {"degrade_flag", s.degrade_flag},
            {"sensitivity", s.sensitivity}, {"track_id", s.track_id},       {"year", s.year}};
}

preprocess::GediShot shot_from_json(const json& j) {
    preprocess::GediShot s;
    j.at("easting").get_to(s.easting);
    j.at("northing").get_to(s.northing);
    j.at("rh_98").get_to(s.rh_98);
    j.at("beam_id").get_to(s.beam_id);
    j.at("quality_flag").get_to(s.quality_flag);
    j.at("degrade_flag").get_to(s.degrade_flag);
    j.at("sensitivity").get_to(s.sensitivity);
    j.at("track_id").get_to(s.track_id);
    j.at("year").get_to(s.year);
    return s;
}

std::string month_file(int month, size_t k) {
    std::ostringstream s;
    s << "s2_m" << std::setw(2) << std::setfill('0') << month << "_a" << k << ".raster";
    return s.str();
}

// Raw year layout: <dir>/raw.json indexes the rasters written beside it.
void write_raw_year(const synth::RawYear& raw, const fs::path& dir, std::vector<std::string>& outputs) {
    fs::create_directories(dir);
    json index = {{"year", raw.year}, {"s2", json::array()}, {"s1", json::array()}, {"shots", json::array()}};
    for (size_t m = 0; m < raw.s2.size(); ++m) {
        auto month = json::array();
        for (size_t k = 0; k < raw.s2[m].size(); ++k) {
            const auto name = month_file(static_cast<int>(m) + 1, k);
            geodata::write_raster(dir / name, raw.s2[m][k].image);
            month.push_back({{"file", name}, {"cloud_fraction", raw.s2[m][k].cloud_fraction}});
        }
        index["s2"].push_back(month);
    }
    for (size_t k = 0; k < raw.s1.size(); ++k) {
        const auto name = "s1_a" + std::to_string(k) + ".raster";
        geodata::write_raster(dir / name, raw.s1[k]);
        index["s1"].push_back(name);
    }
    for (const auto& s : raw.shots) index["shots"].push_back(shot_to_json(s));
    write_json(dir / "raw.json", index);
    outputs.push_back(rel(dir));
}

synth::RawYear read_raw_year(const fs::path& dir) {
    const auto index = read_json_file(dir / "raw.json");
    synth::RawYear raw;
    try {
        raw.year = index.at("year").get<int>();
        for (const auto& month : index.at("s2")) {
            std::vector<preprocess::MonthCandidate> cands;
            for (const auto& c : month) {
                cands.push_back({geodata::read_raster(dir / c.at("file").get<std::string>()),
                                 c.at("cloud_fraction").get<float>()});
            }
            raw.s2.push_back(std::move(cands));
        }
        for (const auto& f : index.at("s1")) raw.s1.push_back(geodata::read_raster(dir / f.get<std::string>()));
        for (const auto& s : index.at("shots")) raw.shots.push_back(shot_from_json(s));
    } catch (const json::exception& e) {
        throw SchemaError(dir.string() + "/raw.json: " + e.what());
    }
    return raw;
}

double median(const std::vector<double>& values) {
    auto v = values;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<uint64_t> seeds_of(const json& cfg) {
    auto seeds = get_or(cfg, "seeds", std::vector<uint64_t>{0});
    if (seeds.empty()) throw ConfigError("seeds", "must not be empty");
    return seeds;
}

eval::BenchmarkConfig benchmark_of(const json& cfg) {
    return cfg.contains("benchmark") ? eval::benchmark_from_json(cfg.at("benchmark")) : eval::BenchmarkConfig{};
}

}  // namespace

json manifest_to_json(const RunManifest& m) {
    return {{"command", m.command},   {"config_hash", m.config_hash}, {"config", m.config},
            {"seed", m.seed},         {"inputs", m.inputs},           {"outputs", m.outputs},
            {"versions", m.versions}, {"wall_seconds", m.wall_seconds}};
}

RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    try {
        j.at("command").get_to(m.command);
        j.at("config_hash").get_to(m.config_hash);
        m.config = j.at("config");
        j.at("seed").get_to(m.seed);
        j.at("inputs").get_to(m.inputs);
        j.at("outputs").get_to(m.outputs);
        m.versions = j.at("versions");
        j.at("wall_seconds").get_to(m.wall_seconds);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("manifest: ") + e.what());
    }
    return m;
}

fs::path manifest_path(const fs::path& out, const std::string& command) { return out / (command + ".manifest.json"); }

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 failed");
    }
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

std::string config_hash(const json& config) { return sha256_hex(config.dump()); }

json version_info() {
    return {{"cht", kVersion},
            {"compiler", __VERSION__},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"zlib", ZLIB_VERSION},
            {"openssl", OPENSSL_VERSION_TEXT}};
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config", path.string() + ": " + e.what());
    }
}

// config: {"scene": SceneConfig, "candidates_per_month": 2}
// writes truth/<year>.raster, raw/<year>/..., scene.json
RunManifest cmd_synth(const json& config, const Options& opt) {
    check_keys(config, {"scene", "candidates_per_month"});
    const auto scene = config.contains("scene") ? synth::config_from_json(config.at("scene")) : synth::SceneConfig{};
    const int k = get_or(config, "candidates_per_month", 2);
    if (k < 1) throw ConfigError("candidates_per_month", "must be >= 1");
    RunManifest m;
    m.seed = scene.seed;
    const auto truth = synth::gen_truth(scene);
    for (int year : scene.years) {
        if (opt.progress) opt.progress("rendering " + std::to_string(year));
        const auto path = opt.out / "truth" / (std::to_string(year) + ".raster");
        fs::create_directories(path.parent_path());
        geodata::write_raster(path, truth.height_raster(year));
        m.outputs.push_back(rel(path));
        write_raw_year(synth::render_year(truth, year, k), opt.out / "raw" / std::to_string(year), m.outputs);
    }
    write_json(opt.out / "scene.json", synth::config_to_json(scene));
    m.outputs.push_back(rel(opt.out / "scene.json"));
    return m;
}

// config: {"raw": dir, "patch_px": 32, "seed": 0}; writes archives/<patch_id>.zip
RunManifest cmd_preprocess(const json& config, const Options& opt) {
    check_keys(config, {"raw", "patch_px", "seed"});
    const auto raw_dir = existing_path(config, "raw");
    const int patch = get_or(config, "patch_px", 32);
    if (patch < 1) throw ConfigError("patch_px", "must be >= 1");
    RunManifest m;
    m.seed = get_or<uint64_t>(config, "seed", 0);
    std::vector<fs::path> years;
    for (const auto& e : fs::directory_iterator(raw_dir))
        if (e.is_directory() && fs::exists(e.path() / "raw.json")) years.push_back(e.path());
    std::sort(years.begin(), years.end());
    if (years.empty()) throw MissingDataError("no raw years under " + raw_dir.string());
    const auto out = opt.out / "archives";
    fs::create_directories(out);
    for (const auto& dir : years) {
        if (opt.progress) opt.progress("preprocessing " + dir.filename().string());
        m.inputs.push_back(rel(dir));
        const auto product = synth::preprocess_raw(read_raw_year(dir));
        if (product.s1.height() % patch != 0 || product.s1.width() % patch != 0) {
            throw ConfigError("patch_px", "must divide the scene size");
        }
        for (const auto& s : synth::cut_samples(product, patch, m.seed)) {
            const auto path = out / (s.patch_id + ".zip");
            geodata::archive_write(s, path);
            m.outputs.push_back(rel(path));
        }
    }
    return m;
}

// config: {"archives": dir, "train": TrainConfig}; writes model.ckpt and train_log.csv
RunManifest cmd_train(const json& config, const Options& opt) {
    check_keys(config, {"archives", "train"});
    const auto dir = existing_path(config, "archives");
    const auto tc = config.contains("train") ? train::config_from_json(config.at("train")) : train::TrainConfig{};
    RunManifest m;
    m.seed = tc.seed;
    std::vector<train::Example> examples;
    for (const auto& path : archives_in(dir)) {
        const auto sample = geodata::archive_read(path);
        if (std::find(tc.years.begin(), tc.years.end(), sample.year) == tc.years.end()) continue;
        examples.push_back(train::make_example(sample, tc.variant));
        m.inputs.push_back(rel(path));
    }
    fs::create_directories(opt.out);
    std::ofstream log(opt.out / "train_log.csv");
    if (opt.progress) opt.progress("training on " + std::to_string(examples.size()) + " samples");
    const auto result = train::train(tc, examples, &log);
    nn::save_checkpoint(opt.out / "model.ckpt", result.checkpoint);
    m.outputs = {rel(opt.out / "model.ckpt"), rel(opt.out / "train_log.csv")};
    return m;
}

namespace {

std::vector<infer::ArchiveResult> predictions_for(const json& config, const std::vector<fs::path>& archives,
                                                  const Options& opt) {
    if (config.contains("checkpoint")) {
        const auto ckpt = nn::load_checkpoint(existing_path(config, "checkpoint"));
        return infer::run_sequential(archives, ckpt, pipeline_config(config, ckpt, opt));
    }
    std::vector<infer::ArchiveResult> out;
    if (config.contains("maps")) {
        // Per-year mosaics, as written by postprocess; each archive window is cut out of them.
        const auto dir = existing_path(config, "maps");
        std::map<int, geodata::RasterPatch> maps;
        for (const auto& a : archives) {
            const auto sample = geodata::archive_read(a);
            if (!maps.count(sample.year)) {
                const auto path = dir / (std::to_string(sample.year) + ".raster");
                if (!fs::exists(path)) throw MissingDataError("no map for " + std::to_string(sample.year) + " in " + dir.string());
                maps.emplace(sample.year, geodata::read_raster(path));
            }
            const auto& map = maps.at(sample.year);
            const auto [x, y] = sample.s1_composite.center_of(0, 0);
            const auto at = map.pixel_of(x, y);
            out.push_back({sample.patch_id, sample.year,
                           geodata::extract_window(map, static_cast<int>(at.row), static_cast<int>(at.col),
                                                   sample.height(), sample.width())});
        }
        return out;
    }
    const auto dir = existing_path(config, "predictions");
    for (const auto& a : archives) {
        const auto sample = geodata::archive_read(a);
        const auto path = dir / (sample.patch_id + ".raster");
        if (!fs::exists(path)) throw MissingDataError("no prediction for " + sample.patch_id + " in " + dir.string());
        out.push_back({sample.patch_id, sample.year, geodata::read_raster(path)});
    }
    return out;
}

}  // namespace

// config: {"archives": dir, "checkpoint": file | "predictions": dir | "maps": dir of <year>.raster,
// "truth": dir (optional),
// "config_id": "model", "window", "margin"}; writes report.json and report.txt
RunManifest cmd_eval(const json& config, const Options& opt) {
    check_keys(config, {"archives", "checkpoint", "predictions", "maps", "truth", "config_id", "window", "margin"});
    if (config.contains("checkpoint") + config.contains("predictions") + config.contains("maps") != 1) {
        throw ConfigError("checkpoint", "give exactly one of checkpoint, predictions and maps");
    }
    const auto archives = archives_in(existing_path(config, "archives"));
    const auto results = predictions_for(config, archives, opt);
    const std::optional<fs::path> truth_dir =
        config.contains("truth") ? std::optional(existing_path(config, "truth")) : std::nullopt;
    RunManifest m;
    std::map<int, eval::YearPairs> pairs;
    std::map<int, geodata::RasterPatch> truth;
    for (size_t i = 0; i < archives.size(); ++i) {
        m.inputs.push_back(rel(archives[i]));
        const auto& pred = results[i].heights;
        auto& p = pairs[results[i].year];
        if (truth_dir) {
            const int year = results[i].year;
            if (!truth.count(year)) {
                const auto path = *truth_dir / (std::to_string(year) + ".raster");
                if (!fs::exists(path)) throw MissingDataError("no truth raster for " + std::to_string(year));
                truth.emplace(year, geodata::read_raster(path));
            }
            const auto& t = truth.at(year);
            const auto [x, y] = pred.center_of(0, 0);
            const auto at = t.pixel_of(x, y);
            const auto window = geodata::extract_window(t, static_cast<int>(at.row), static_cast<int>(at.col),
                                                        pred.height(), pred.width());
            for (size_t k = 0; k < window.data().size(); ++k) {
                p.preds.push_back(pred.data()[k]);
                p.labels.push_back(window.data()[k]);
            }
        } else {
            const auto sample = geodata::archive_read(archives[i]);
            for (const auto& l : sample.labels) {
                p.preds.push_back(pred.data()[static_cast<size_t>(l.row) * pred.width() + l.col]);
                p.labels.push_back(l.height);
            }
        }
    }
    const auto report = eval::build_report(get_or<std::string>(config, "config_id", "model"), pairs);
    write_json(opt.out / "report.json", eval::report_to_json(report));
    write_text(opt.out / "report.txt", eval::table_to_text(eval::compare_configs({report})));
    m.outputs = {rel(opt.out / "report.json"), rel(opt.out / "report.txt")};
    return m;
}

// config: {"archives": dir, "checkpoint": file, "window": 256, "margin": 32}; writes
// maps/<patch_id>.raster and maps/index.json
RunManifest cmd_infer(const json& config, const Options& opt) {
    check_keys(config, {"archives", "checkpoint", "window", "margin"});
    const auto archives = archives_in(existing_path(config, "archives"));
    const auto ckpt = nn::load_checkpoint(existing_path(config, "checkpoint"));
    auto pc = pipeline_config(config, ckpt, opt);
    pc.progress = opt.progress;
    infer::PipelineStats stats;
    const auto results = infer::run_pipeline(archives, ckpt, pc, &stats);
    RunManifest m;
    const auto dir = opt.out / "maps";
    fs::create_directories(dir);
    auto index = json::array();
    for (size_t i = 0; i < results.size(); ++i) {
        m.inputs.push_back(rel(archives[i]));
        const auto name = results[i].patch_id + ".raster";
        geodata::write_raster(dir / name, results[i].heights);
        index.push_back({{"patch_id", results[i].patch_id}, {"year", results[i].year}, {"file", name}});
        m.outputs.push_back(rel(dir / name));
    }
    write_json(dir / "index.json", index);
    m.outputs.push_back(rel(dir / "index.json"));
    if (opt.progress) {
        std::ostringstream s;
        s << stats.windows << " windows in " << std::fixed << std::setprecision(2) << stats.seconds << " s, queue "
          << stats.queue_high_water << "/" << stats.queue_capacity;
        opt.progress(s.str());
    }
    return m;
}

// config: {"maps": dir with index.json, "smoothing": 5, "loss_high": 8, "loss_low": 5};
// writes mosaic/<year>.raster, smoothed/<year>.raster, change_report.json and .txt
RunManifest cmd_postprocess(const json& config, const Options& opt) {
    check_keys(config, {"maps", "smoothing", "loss_high", "loss_low"});
    const auto dir = existing_path(config, "maps");
    const double smoothing = get_or(config, "smoothing", temporal::kDefaultSmoothing);
    const double hi = get_or(config, "loss_high", temporal::kLossHigh);
    const double lo = get_or(config, "loss_low", temporal::kLossLow);
    if (!(smoothing >= 0.0)) throw ConfigError("smoothing", "must be >= 0");
    const auto index = read_json_file(dir / "index.json");
    RunManifest m;
    std::map<int, std::vector<geodata::RasterPatch>> per_year;
    try {
        for (const auto& e : index) {
            const auto file = dir / e.at("file").get<std::string>();
            per_year[e.at("year").get<int>()].push_back(geodata::read_raster(file));
            m.inputs.push_back(rel(file));
        }
    } catch (const json::exception& e) {
        throw SchemaError("maps/index.json: " + std::string(e.what()));
    }
    std::vector<int> years;
    std::vector<geodata::RasterPatch> mosaics;
    for (const auto& [year, patches] : per_year) {
        years.push_back(year);
        mosaics.push_back(geodata::mosaic(patches));
        const auto path = opt.out / "mosaic" / (std::to_string(year) + ".raster");
        fs::create_directories(path.parent_path());
        geodata::write_raster(path, mosaics.back());
        m.outputs.push_back(rel(path));
    }
    const auto smoothed = years.size() >= 3 ? temporal::smooth_map(years, mosaics, smoothing) : mosaics;
    for (size_t k = 0; k < years.size(); ++k) {
        const auto path = opt.out / "smoothed" / (std::to_string(years[k]) + ".raster");
        fs::create_directories(path.parent_path());
        geodata::write_raster(path, smoothed[k]);
        m.outputs.push_back(rel(path));
    }
    const auto report = temporal::change_report(years, smoothed, hi, lo);
    write_json(opt.out / "change_report.json", temporal::change_report_to_json(report));
    write_text(opt.out / "change_report.txt", temporal::change_report_to_text(report));
    m.outputs.push_back(rel(opt.out / "change_report.json"));
    m.outputs.push_back(rel(opt.out / "change_report.txt"));
    return m;
}

// config: {"benchmark": BenchmarkConfig, "variant": "3D-Stack", "seeds": [0, ...]}; writes
// ablation.json (per seed and median) and ablation.txt (median)
RunManifest cmd_ablate(const json& config, const Options& opt) {
    check_keys(config, {"benchmark", "variant", "seeds"});
    const auto bench = benchmark_of(config);
    preprocess::Variant variant;
    try {
        variant = preprocess::variant_from_name(get_or<std::string>(config, "variant", "3D-Stack"));
    } catch (const Error& e) {
        throw ConfigError("variant", e.what());
    }
    const auto seeds = seeds_of(config);
    RunManifest m;
    m.seed = seeds.front();
    json per_seed = json::object();
    std::map<std::string, std::vector<double>> losses, maes;
    std::vector<eval::AblationRow> order;
    for (auto seed : seeds) {
        const auto rows = eval::run_ablation(bench, variant, seed, opt.progress);
        per_seed[std::to_string(seed)] = eval::ablation_to_json(rows);
        if (order.empty()) order = rows;
        for (const auto& r : rows) {
            losses[r.name].push_back(r.validation_loss);
            maes[r.name].push_back(r.mae);
        }
    }
    for (auto& r : order) {
        r.validation_loss = median(losses.at(r.name));
        r.mae = median(maes.at(r.name));
    }
    write_json(opt.out / "ablation.json", {{"seeds", per_seed}, {"median", eval::ablation_to_json(order)}});
    write_text(opt.out / "ablation.txt", eval::ablation_to_text(order));
    m.outputs = {rel(opt.out / "ablation.json"), rel(opt.out / "ablation.txt")};
    return m;
}

namespace {

eval::Regime regime_from_name(const std::string& name) {
    for (auto r : {eval::Regime::single2020, eval::Regime::per_year, eval::Regime::multi_year})
        if (eval::regime_name(r) == name) return r;
    throw ConfigError("regimes", "unknown regime " + name);
}

}  // namespace

// config: {"benchmark": BenchmarkConfig, "variants": [...], "regimes": [...], "seeds": [...]};
// writes comparison.json (per seed and median MAE) and comparison.txt (median)
RunManifest cmd_compare(const json& config, const Options& opt) {
    check_keys(config, {"benchmark", "variants", "regimes", "seeds"});
    const auto bench = benchmark_of(config);
    std::vector<preprocess::Variant> variants;
    for (const auto& n : get_or(config, "variants", std::vector<std::string>{"2D-Composite", "2D-Stack", "3D-Stack"})) {
        try {
            variants.push_back(preprocess::variant_from_name(n));
        } catch (const Error& e) {
            throw ConfigError("variants", e.what());
        }
    }
    std::vector<eval::Regime> regimes;
    for (const auto& n : get_or(config, "regimes", std::vector<std::string>{"2020", "Year", "MultiYear"}))
        regimes.push_back(regime_from_name(n));
    const auto seeds = seeds_of(config);
    RunManifest m;
    m.seed = seeds.front();
    json per_seed = json::object();
    std::map<std::string, std::vector<std::vector<double>>> values;  // id -> per year -> seeds
    std::vector<int> years;
    for (auto seed : seeds) {
        const auto reports = eval::run_config_benchmark(bench, variants, regimes, seed, opt.progress);
        const auto table = eval::compare_configs(reports);
        per_seed[std::to_string(seed)] = eval::table_to_json(table);
        years = table.years;
        for (const auto& row : table.rows) {
            auto& v = values[row.config_id];
            v.resize(years.size());
            for (size_t y = 0; y < years.size(); ++y)
                if (row.mae[y]) v[y].push_back(*row.mae[y]);
        }
    }
    eval::ComparisonTable med;
    med.years = years;
    for (const auto& [id, per_year] : values) {
        eval::ComparisonTable::Row row{id, {}, 0.0};
        int n = 0;
        for (const auto& v : per_year) {
            if (v.empty()) {
                row.mae.push_back(std::nullopt);
                continue;
            }
            row.mae.push_back(std::round(median(v) * 1000.0) / 1000.0);
            row.avg += *row.mae.back();
            ++n;
        }
        row.avg = n ? std::round(row.avg / n * 1000.0) / 1000.0 : 0.0;
        med.rows.push_back(row);
    }
    std::stable_sort(med.rows.begin(), med.rows.end(), [](const auto& a, const auto& b) { return a.avg < b.avg; });
    write_json(opt.out / "comparison.json", {{"seeds", per_seed}, {"median", eval::table_to_json(med)}});
    write_text(opt.out / "comparison.txt", eval::table_to_text(med));
    m.outputs = {rel(opt.out / "comparison.json"), rel(opt.out / "comparison.txt")};
    return m;
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"synth", "preprocess", "train",  "eval",
                                                "infer", "postprocess", "ablate", "compare"};
    return names;
}

RunManifest run_command(const std::string& command, const json& config, const Options& opt) {
    using Fn = RunManifest (*)(const json&, const Options&);
    static const std::map<std::string, Fn> table{{"synth", cmd_synth},   {"preprocess", cmd_preprocess},
                                                 {"train", cmd_train},   {"eval", cmd_eval},
                                                 {"infer", cmd_infer},   {"postprocess", cmd_postprocess},
                                                 {"ablate", cmd_ablate}, {"compare", cmd_compare}};
    const auto it = table.find(command);
    if (it == table.end()) throw ConfigError("command", "unknown command " + command);
    const auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(opt.out);
    auto m = it->second(config, opt);
    m.command = command;
    m.config = config;
    m.config_hash = config_hash(config);
    m.versions = version_info();
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(manifest_path(opt.out, command), manifest_to_json(m));
    return m;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const json::exception*>(&e)) return 2;
    if (dynamic_cast<const Error*>(&e)) return 3;
    if (dynamic_cast<const fs::filesystem_error*>(&e)) return 3;
    return 1;
}

}  // namespace cht::cli
