#pragma once

#include <cstdint>
#include <vector>

#include "cht/nn/unet.hpp"

namespace cht::train {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct AdamState {
    int64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    bool operator==(const AdamState&) const = default;
};

// One bias-corrected Adam update from the parameters' gradient buffers, followed by
// decoupled weight decay p -= weight_decay * lr * p.
void adam_step(nn::Params& params, AdamState& state, double lr, const AdamConfig& cfg);

// Linear warmup from 0 over ceil(warmup_frac * iterations) steps, then linear decay to 0 at
// the last iteration.
double lr_at(int64_t iter, int64_t iterations, double peak_lr, double warmup_frac);
int64_t warmup_steps(int64_t iterations, double warmup_frac);

// Global L2 norm over every gradient buffer; scales all of them by max_norm / norm when the
// norm exceeds max_norm. Returns the norm before clipping.
double clip_gradients(nn::Params& params, double max_norm);
double grad_norm(const nn::Params& params);

}  // namespace cht::train
