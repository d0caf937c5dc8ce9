#include "cht/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cht/error.hpp"

namespace cht::eval {

Metrics metrics(std::span<const float> preds, std::span<const float> labels, std::optional<double> threshold) {
    if (preds.size() != labels.size()) {
        throw ShapeError("metrics: " + std::to_string(preds.size()) + " predictions for " +
                         std::to_string(labels.size()) + " labels");
    }
    double sum_y = 0.0;
    int64_t n = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (threshold && !(labels[i] > *threshold)) continue;
        sum_y += labels[i];
        ++n;
    }
    if (n < 2) throw InsufficientDataError("metrics need at least 2 labels, got " + std::to_string(n));
    const double mean_y = sum_y / static_cast<double>(n);
    double abs_sum = 0.0, sq_sum = 0.0, var_sum = 0.0;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (threshold && !(labels[i] > *threshold)) continue;
        const double e = static_cast<double>(preds[i]) - labels[i];
        abs_sum += std::abs(e);
        sq_sum += e * e;
        var_sum += (labels[i] - mean_y) * (labels[i] - mean_y);
    }
    if (var_sum == 0.0) throw InsufficientDataError("metrics: labels have zero variance");
    Metrics m;
    m.n = n;
    m.mae = abs_sum / static_cast<double>(n);
    m.mse = sq_sum / static_cast<double>(n);
    m.r2 = 1.0 - sq_sum / var_sum;
    return m;
}

int bin_of(double label) {
    if (!(label >= kBinLo) || label > kBinHi) return -1;
    const int nbins = static_cast<int>((kBinHi - kBinLo) / kBinWidth);
    return std::min(nbins - 1, static_cast<int>((label - kBinLo) / kBinWidth));
}

std::vector<Bin> binned_errors(std::span<const float> preds, std::span<const float> labels) {
    if (preds.size() != labels.size()) throw ShapeError("binned_errors: length mismatch");
    const int nbins = static_cast<int>((kBinHi - kBinLo) / kBinWidth);
    std::vector<double> sums(nbins, 0.0);
    std::vector<Bin> bins(nbins);
    for (int b = 0; b < nbins; ++b) {
        bins[b].lo = kBinLo + b * kBinWidth;
        bins[b].hi = bins[b].lo + kBinWidth;
    }
    for (size_t i = 0; i < labels.size(); ++i) {
        const int b = bin_of(labels[i]);
        if (b < 0) continue;
        sums[b] += static_cast<double>(preds[i]) - labels[i];
        ++bins[b].count;
    }
    for (int b = 0; b < nbins; ++b) {
        if (bins[b].count > 0) bins[b].mean_error = sums[b] / static_cast<double>(bins[b].count);
    }
    return bins;
}

bool Window::overlaps(const Window& o) const {
    return row0 < o.row0 + o.size && o.row0 < row0 + size && col0 < o.col0 + o.size && o.col0 < col0 + size;
}

std::vector<Window> sample_validation_points(int h, int w, int n, uint64_t seed, int patch_px) {
    if (n < 1) throw DomainError("sample_validation_points: n must be >= 1");
    if (patch_px < 1) throw DomainError("sample_validation_points: patch_px must be >= 1");
    // Every half-open p x p square holds exactly one point of the lattice p*Z^2 shifted by
    // p - 1, so at most floor(h/p) * floor(w/p) disjoint windows fit.
    const int64_t capacity = static_cast<int64_t>(h / patch_px) * (w / patch_px);
    if (n > capacity) {
        throw CapacityError("cannot place " + std::to_string(n) + " disjoint " + std::to_string(patch_px) +
                            " px windows in a " + std::to_string(h) + "x" + std::to_string(w) +
                            " extent (at most " + std::to_string(capacity) + ")");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> row(0, h - patch_px), col(0, w - patch_px);
    std::vector<Window> out;
    const int64_t budget = 1000 * static_cast<int64_t>(n);
    for (int64_t attempt = 0; attempt < budget && static_cast<int>(out.size()) < n; ++attempt) {
        const Window cand{row(rng), col(rng), patch_px};
        if (std::none_of(out.begin(), out.end(), [&](const Window& o) { return o.overlaps(cand); })) {
            out.push_back(cand);
        }
    }
    if (static_cast<int>(out.size()) == n) return out;
    // Dense requests: shuffle the aligned grid instead.
    std::vector<Window> grid;
    for (int r = 0; r + patch_px <= h; r += patch_px)
        for (int c = 0; c + patch_px <= w; c += patch_px) grid.push_back({r, c, patch_px});
    std::shuffle(grid.begin(), grid.end(), rng);
    grid.resize(static_cast<size_t>(n));
    return grid;
}

std::map<int, Metrics> stratified_metrics(std::span<const float> preds, std::span<const float> labels,
                                          std::span<const int> strata) {
    if (preds.size() != labels.size() || strata.size() != labels.size()) {
        throw ShapeError("stratified_metrics: length mismatch");
    }
    std::map<int, std::pair<std::vector<float>, std::vector<float>>> groups;
    for (size_t i = 0; i < labels.size(); ++i) {
        auto& g = groups[strata[i]];
        g.first.push_back(preds[i]);
        g.second.push_back(labels[i]);
    }
    std::map<int, Metrics> out;
    for (const auto& [s, g] : groups) {
        try {
            out[s] = metrics(g.first, g.second);
        } catch (const InsufficientDataError&) {
        }
    }
    return out;
}

nlohmann::json metrics_to_json(const Metrics& m) {
    return {{"mae", m.mae}, {"mse", m.mse}, {"r2", m.r2}, {"n", m.n}};
}

nlohmann::json bins_to_json(const std::vector<Bin>& bins) {
    auto out = nlohmann::json::array();
    for (const auto& b : bins) {
        nlohmann::json j = {{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}};
        j["mean_error"] = b.mean_error ? nlohmann::json(*b.mean_error) : nlohmann::json(nullptr);
        out.push_back(j);
    }
    return out;
}

}  // namespace cht::eval
