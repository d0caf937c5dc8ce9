#pragma once

#include <vector>

#include "cht/geodata/raster.hpp"

namespace cht::temporal {

struct HeightSeries {
    std::vector<int> years;  // strictly increasing
    std::vector<double> values;

    bool operator==(const HeightSeries&) const = default;
};

struct SmoothInfo {
    int knots = 0;       // interior knots inserted
    double rss = 0.0;    // residual sum of squares of the returned fit
    bool interpolated = false;
};

inline constexpr double kDefaultSmoothing = 5.0;

// Least-squares quadratic over (year, value). When its RSS exceeds `smoothing` (m^2), interior
// knots of a quadratic spline are inserted one at a time at the midpoint of the interval
// whose endpoint residuals are largest, until the RSS fits the budget or the spline
// interpolates. Output is clamped at 0. Series of two points come back unchanged; a series
// that the fit reproduces to within 1e-9 m comes back as given.
HeightSeries smooth_series(const HeightSeries& s, double smoothing = kDefaultSmoothing, SmoothInfo* info = nullptr);

// smooth_series per pixel over single-band, same-grid rasters ordered by year. Pixels that are
// nodata (or non-finite) in any year pass through untouched. Throws ShapeError on misaligned
// rasters and DomainError for fewer than three years.
std::vector<geodata::RasterPatch> smooth_map(const std::vector<int>& years,
                                             const std::vector<geodata::RasterPatch>& stack,
                                             double smoothing = kDefaultSmoothing);

}  // namespace cht::temporal
