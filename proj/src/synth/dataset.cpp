#include "cht/synth/dataset.hpp"

#include "cht/error.hpp"
#include "cht/preprocess/gedi.hpp"
#include "cht/preprocess/imagery.hpp"

namespace cht::synth {

RawYear render_year(const TruthField& truth, int year, int candidates_per_month) {
    if (candidates_per_month < 1) throw ConfigError("candidates_per_month", "must be >= 1");
    RawYear raw;
    raw.year = year;
    raw.s2.resize(12);
    for (int m = 1; m <= 12; ++m) {
        for (int k = 0; k < candidates_per_month; ++k) {
            auto img = render_month(truth, year, m, k);
            raw.s2[m - 1].push_back({std::move(img.image), img.cloud_fraction});
        }
    }
    raw.s1 = render_s1_year(truth, year);
    raw.shots = sample_gedi(truth, year);
    return raw;
}

YearProduct preprocess_raw(const RawYear& raw) {
    YearProduct out;
    out.year = raw.year;
    for (const auto& month : raw.s2) {
        std::vector<float> fr;
        for (const auto& c : month) fr.push_back(c.cloud_fraction);
        if (fr.empty()) break;
        out.cloud_fractions.push_back(fr[preprocess::best_candidate_index(fr)]);
    }
    for (auto& month : preprocess::select_monthly_best(raw.s2)) {
        out.s2_months.push_back(preprocess::normalize_s2(month, preprocess::NormTable::sentinel2()));
    }
    out.s1 = preprocess::normalize_s1(preprocess::median_composite(raw.s1));
    out.labels = preprocess::rasterize_labels(preprocess::filter_gedi(raw.shots), out.s1);
    return out;
}

YearProduct preprocess_year(const TruthField& truth, int year, int candidates_per_month) {
    return preprocess_raw(render_year(truth, year, candidates_per_month));
}

geodata::SampleArchive window_sample(const YearProduct& product, int row0, int col0, int h, int w,
                                     const std::string& id, uint64_t seed) {
    geodata::SampleArchive s;
    s.patch_id = id;
    s.year = product.year;
    for (int m = 0; m < 12; ++m) {
        s.months.push_back(m + 1);
        s.s2_stack.push_back(geodata::extract_window(product.s2_months[m], row0, col0, h, w));
    }
    s.s1_composite = geodata::extract_window(product.s1, row0, col0, h, w);
    for (const auto& l : product.labels) {
        if (l.row >= row0 && l.row < row0 + h && l.col >= col0 && l.col < col0 + w) {
            s.labels.push_back({l.row - row0, l.col - col0, l.height, l.track_id});
        }
    }
    s.metadata.seed = seed;
    s.metadata.cloud_fractions = product.cloud_fractions;
    return s;
}

std::vector<geodata::SampleArchive> cut_samples(const YearProduct& product, int patch_px, uint64_t seed) {
    const int n = product.s1.height();
    if (patch_px < 1 || n % patch_px != 0) {
        throw ConfigError("patch_px", "must divide the scene size " + std::to_string(n));
    }
    std::vector<geodata::SampleArchive> out;
    for (int pr = 0; pr < n / patch_px; ++pr) {
        for (int pc = 0; pc < n / patch_px; ++pc) {
            const std::string id = std::to_string(product.year) + "_r" + std::to_string(pr) + "_c" +
                                   std::to_string(pc);
            out.push_back(window_sample(product, pr * patch_px, pc * patch_px, patch_px, patch_px, id, seed));
        }
    }
    return out;
}

}  // namespace cht::synth
