#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

namespace cht::eval {

struct Metrics {
    double mae = 0.0;
    double mse = 0.0;
    double r2 = 0.0;
    int64_t n = 0;

    bool operator==(const Metrics&) const = default;
};

// mae, mse and r2 over the pairs whose label exceeds `threshold` (all pairs when absent).
// Throws InsufficientDataError for fewer than two pairs or zero label variance, and
// ShapeError for mismatched lengths.
Metrics metrics(std::span<const float> preds, std::span<const float> labels,
                std::optional<double> threshold = std::nullopt);

struct Bin {
    double lo = 0.0;
    double hi = 0.0;
    std::optional<double> mean_error;  // mean(pred - label); absent for an empty bin
    int64_t count = 0;
};

// Label bins [10,15), [15,20), ..., [30,35) and the closed top bin [35,40].
inline constexpr double kBinLo = 10.0;
inline constexpr double kBinHi = 40.0;
inline constexpr double kBinWidth = 5.0;
std::vector<Bin> binned_errors(std::span<const float> preds, std::span<const float> labels);
// Bin index of a label, or -1 outside [10, 40].
int bin_of(double label);

// Square window in pixels.
struct Window {
    int row0 = 0;
    int col0 = 0;
    int size = 0;

    bool overlaps(const Window& o) const;
    bool operator==(const Window&) const = default;
};

// n pairwise-disjoint windows of patch_px inside an h x w extent, uniform over positions and
// deterministic in seed. Throws CapacityError when n disjoint windows cannot fit.
std::vector<Window> sample_validation_points(int h, int w, int n, uint64_t seed, int patch_px = 256);

// Metrics per stratum value. Strata with fewer than two labels (or constant labels) are absent.
std::map<int, Metrics> stratified_metrics(std::span<const float> preds, std::span<const float> labels,
                                          std::span<const int> strata);

nlohmann::json metrics_to_json(const Metrics& m);
nlohmann::json bins_to_json(const std::vector<Bin>& bins);

}  // namespace cht::eval
