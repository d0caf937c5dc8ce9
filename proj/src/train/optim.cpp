#include "cht/train/optim.hpp"

#include <cmath>

namespace cht::train {

void adam_step(nn::Params& params, AdamState& state, double lr, const AdamConfig& cfg) {
    auto& tensors = params.tensors();
    if (state.m.size() != tensors.size()) {
        state.m.assign(tensors.size(), {});
        state.v.assign(tensors.size(), {});
        for (size_t i = 0; i < tensors.size(); ++i) {
            state.m[i].assign(tensors[i].numel(), 0.0);
            state.v[i].assign(tensors[i].numel(), 0.0);
        }
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    const double decay = cfg.weight_decay * lr;
    for (size_t i = 0; i < tensors.size(); ++i) {
        auto p = tensors[i].data();
        const auto g = tensors[i].grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (size_t k = 0; k < p.size(); ++k) {
            const double gk = g.empty() ? 0.0 : g[k];
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
            double w = p[k];
            w -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
            w -= decay * w;
            p[k] = static_cast<float>(w);
        }
    }
}

int64_t warmup_steps(int64_t iterations, double warmup_frac) {
    // The small guard keeps e.g. 0.1 * 500 from rounding up to 51.
    return static_cast<int64_t>(std::ceil(warmup_frac * static_cast<double>(iterations) - 1e-9));
}

double lr_at(int64_t iter, int64_t iterations, double peak_lr, double warmup_frac) {
    const int64_t warm = warmup_steps(iterations, warmup_frac);
    if (iter < warm) return peak_lr * static_cast<double>(iter) / static_cast<double>(warm);
    const int64_t span = iterations - 1 - warm;
    if (span <= 0) return peak_lr;
    return peak_lr * static_cast<double>(iterations - 1 - iter) / static_cast<double>(span);
}

double grad_norm(const nn::Params& params) {
    double sq = 0.0;
    for (const auto& t : params.tensors()) {
        for (float g : t.grad()) sq += static_cast<double>(g) * g;
    }
    return std::sqrt(sq);
}

double clip_gradients(nn::Params& params, double max_norm) {
    const double norm = grad_norm(params);
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (auto& t : params.tensors()) {
            if (t.grad().empty()) continue;
            for (auto& g : t.mutable_grad()) g = static_cast<float>(g * s);
        }
    }
    return norm;
}

}  // namespace cht::train
