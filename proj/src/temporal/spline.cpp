#include "cht/temporal/spline.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "cht/error.hpp"

namespace cht::temporal {

namespace {

struct Fit {
    std::vector<double> values;
    std::vector<double> residuals;
    double rss = 0.0;
};

// Truncated power basis 1, t, t^2, (t - k)_+^2 on centred years.
Fit fit_spline(const std::vector<double>& t, const std::vector<double>& y, const std::vector<double>& knots) {
    const int n = static_cast<int>(t.size());
    const int p = 3 + static_cast<int>(knots.size());
    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd Y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = t[i];
        X(i, 2) = t[i] * t[i];
        for (size_t k = 0; k < knots.size(); ++k) {
            const double d = std::max(0.0, t[i] - knots[k]);
            X(i, 3 + static_cast<int>(k)) = d * d;
        }
        Y(i) = y[i];
    }
    const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(Y);
    const Eigen::VectorXd fitted = X * beta;
    Fit f;
    for (int i = 0; i < n; ++i) {
        f.values.push_back(fitted(i));
        f.residuals.push_back(y[i] - fitted(i));
        f.rss += f.residuals.back() * f.residuals.back();
    }
    return f;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

HeightSeries clamped(const HeightSeries& s, const std::vector<double>& values) {
    HeightSeries out{s.years, values};
    for (auto& v : out.values) v = std::max(0.0, v);
    return out;
}

}  // namespace

HeightSeries smooth_series(const HeightSeries& s, double smoothing, SmoothInfo* info) {
    if (s.years.size() != s.values.size()) throw ShapeError("smooth_series: years and values differ in length");
    if (s.years.size() < 2) throw DomainError("smooth_series: need at least 2 points");
    for (size_t i = 1; i < s.years.size(); ++i) {
        if (s.years[i] <= s.years[i - 1]) throw DomainError("smooth_series: years must increase strictly");
    }
    if (!(smoothing >= 0)) throw DomainError("smooth_series: smoothing must be >= 0");
    SmoothInfo local;
    SmoothInfo& inf = info ? *info : local;
    inf = SmoothInfo{};
    if (s.years.size() == 2) {
        inf.interpolated = true;
        return s;
    }

    double mean = 0.0;
    for (int y : s.years) mean += y;
    mean /= static_cast<double>(s.years.size());
    std::vector<double> t;
    for (int y : s.years) t.push_back(y - mean);

    std::vector<double> knots;
    auto fit = fit_spline(t, s.values, knots);
    const double exact_tol = 1e-9;
    while (true) {
        if (max_abs(fit.residuals) <= exact_tol) {
            inf.knots = static_cast<int>(knots.size());
            inf.rss = 0.0;
            inf.interpolated = true;
            return clamped(s, s.values);
        }
        if (fit.rss <= smoothing) break;
        // Interval with the largest endpoint residuals that has no knot yet.
        int best = -1;
        double best_score = -1.0;
        for (size_t i = 0; i + 1 < t.size(); ++i) {
            const double mid = 0.5 * (t[i] + t[i + 1]);
            if (std::find(knots.begin(), knots.end(), mid) != knots.end()) continue;
            const double score = fit.residuals[i] * fit.residuals[i] + fit.residuals[i + 1] * fit.residuals[i + 1];
            if (score > best_score) {
                best_score = score;
                best = static_cast<int>(i);
            }
        }
        if (best < 0) break;
        knots.push_back(0.5 * (t[best] + t[best + 1]));
        fit = fit_spline(t, s.values, knots);
    }
    inf.knots = static_cast<int>(knots.size());
    inf.rss = fit.rss;
    return clamped(s, fit.values);
}

std::vector<geodata::RasterPatch> smooth_map(const std::vector<int>& years,
                                             const std::vector<geodata::RasterPatch>& stack, double smoothing) {
    if (years.size() != stack.size()) throw ShapeError("smooth_map: one raster per year required");
    if (stack.size() < 3) throw DomainError("smooth_map: need at least 3 years");
    for (const auto& r : stack) {
        if (r.band_count() != 1) throw ShapeError("smooth_map: rasters must have one band");
        if (!r.same_grid(stack.front())) throw ShapeError("smooth_map: rasters are not aligned");
    }
    const auto& ref = stack.front();
    const size_t npx = static_cast<size_t>(ref.height()) * ref.width();
    std::vector<std::vector<float>> out(stack.size());
    for (size_t k = 0; k < stack.size(); ++k) out[k].assign(stack[k].data().begin(), stack[k].data().end());
    HeightSeries series{years, std::vector<double>(years.size())};
    for (size_t p = 0; p < npx; ++p) {
        bool valid = true;
        for (size_t k = 0; k < stack.size(); ++k) {
            const float v = stack[k].data()[p];
            if (!std::isfinite(v) || v == stack[k].nodata()) {
                valid = false;
                break;
            }
            series.values[k] = v;
        }
        if (!valid) continue;
        const auto sm = smooth_series(series, smoothing);
        for (size_t k = 0; k < stack.size(); ++k) out[k][p] = static_cast<float>(sm.values[k]);
    }
    std::vector<geodata::RasterPatch> result;
    for (size_t k = 0; k < stack.size(); ++k) {
        result.emplace_back(stack[k].origin(), stack[k].resolution(), stack[k].bands(), stack[k].height(),
                            stack[k].width(), std::move(out[k]), stack[k].nodata());
    }
    return result;
}

}  // namespace cht::temporal
