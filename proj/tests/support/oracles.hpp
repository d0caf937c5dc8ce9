#pragma once

// Independent reference implementations used only by tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "cht/nn/ops.hpp"
#include "cht/nn/tensor.hpp"
#include "cht/nn/unet.hpp"

namespace cht::oracle {

// Direct-sum cross-correlation over [B, Cin, D, H, W] with zero padding.
inline std::vector<double> conv_direct(const std::vector<double>& x, const std::vector<double>& w,
                                       const std::vector<double>& b, int B, int Cin, int D, int H,
                                       int W, int Cout, int kd, int kh, int kw, int sd, int sh,
                                       int sw, int pd, int ph, int pw, int& Do, int& Ho, int& Wo) {
    Do = (D + 2 * pd - kd) / sd + 1;
    Ho = (H + 2 * ph - kh) / sh + 1;
    Wo = (W + 2 * pw - kw) / sw + 1;
    std::vector<double> out(static_cast<size_t>(B) * Cout * Do * Ho * Wo, 0.0);
    for (int n = 0; n < B; ++n)
        for (int co = 0; co < Cout; ++co)
            for (int od = 0; od < Do; ++od)
                for (int oh = 0; oh < Ho; ++oh)
                    for (int ow = 0; ow < Wo; ++ow) {
                        double acc = b.empty() ? 0.0 : b[co];
                        for (int ci = 0; ci < Cin; ++ci)
                            for (int a = 0; a < kd; ++a)
                                for (int c = 0; c < kh; ++c)
                                    for (int e = 0; e < kw; ++e) {
                                        const int id = od * sd - pd + a;
                                        const int ih = oh * sh - ph + c;
                                        const int iw = ow * sw - pw + e;
                                        if (id < 0 || ih < 0 || iw < 0 || id >= D || ih >= H || iw >= W) continue;
                                        acc += x[(((size_t)n * Cin + ci) * D + id) * H * W + (size_t)ih * W + iw] *
                                               w[(((size_t)co * Cin + ci) * kd + a) * kh * kw + (size_t)c * kw + e];
                                    }
                        out[(((size_t)n * Cout + co) * Do + od) * Ho * Wo + (size_t)oh * Wo + ow] = acc;
                    }
    return out;
}

struct GradCheckResult {
    double max_rel_error = 0.0;
    int coordinates = 0;
    int kink_adjacent = 0;  // coordinates where a one-sided difference was needed
    double live_fraction = 0.0;  // share of checked coordinates with a nonzero gradient
};

// Central finite differences with step eps on every coordinate of every leaf (or a
// strided subset when `max_per_leaf` is smaller than the leaf). Where the two one-sided
// differences disagree the eps-window contains a non-differentiable point; there the
// analytic value is compared with the one-sided difference from the kink-free side.
inline GradCheckResult grad_check(std::vector<nn::TensorD> leaves,
                                  const std::function<nn::TensorD()>& loss_fn, double eps = 1e-3,
                                  int max_per_leaf = 1 << 30) {
    for (auto& l : leaves) {
        l.set_requires_grad(true);
        l.zero_grad();
    }
    nn::backward(loss_fn());
    GradCheckResult res;
    for (auto& leaf : leaves) {
        const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
        const int64_t n = leaf.numel();
        const int64_t step = std::max<int64_t>(1, n / max_per_leaf);
        for (int64_t i = 0; i < n; i += step) {
            double& v = leaf.data()[i];
            const double orig = v;
            const double f0 = loss_fn().item();
            v = orig + eps;
            const double fp = loss_fn().item();
            v = orig - eps;
            const double fm = loss_fn().item();
            v = orig;
            const double central = (fp - fm) / (2 * eps);
            const double fwd = (fp - f0) / eps;
            const double bwd = (f0 - fm) / eps;
            auto rel = [](double a, double b) {
                return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
            };
            double err = rel(analytic[i], central);
            if (rel(fwd, bwd) > 1e-6) {
                ++res.kink_adjacent;
                err = std::min({err, rel(analytic[i], fwd), rel(analytic[i], bwd)});
            }
            res.max_rel_error = std::max(res.max_rel_error, err);
            ++res.coordinates;
            if (analytic[i] != 0.0) res.live_fraction += 1.0;
        }
    }
    if (res.coordinates) res.live_fraction /= res.coordinates;
    return res;
}

inline nn::TensorD random_tensor(std::mt19937_64& rng, nn::Shape shape, double lo = -1.0,
                                 double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(static_cast<size_t>(nn::numel(shape)));
    for (auto& e : v) e = u(rng);
    return nn::TensorD::from(std::move(shape), std::move(v));
}

// Gradient checks need a point where no ReLU sits within eps of its kink. Larger weights
// make an eps step small relative to typical pre-activations, random biases spread them
// away from zero, and the head bias lifts every output above the final ReLU.
inline void move_to_generic_point(const nn::UNetSpec& spec, nn::BasicParams<double>& params,
                                  const nn::TensorD& x, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (size_t i = 0; i < params.size(); ++i) {
        const bool is_bias = params.names()[i].ends_with(".bias");
        for (auto& v : params.tensors()[i].data()) v = is_bias ? u(rng) : 3.0 * v;
    }
    auto linear = spec;
    linear.with_final_relu = false;
    auto pre = nn::unet_forward(linear, params, x);
    const double lo = *std::min_element(pre.data().begin(), pre.data().end());
    params.get("head.bias").node()->value[0] += 1.0 - lo;
}

}  // namespace cht::oracle
