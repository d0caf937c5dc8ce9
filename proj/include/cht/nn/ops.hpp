#pragma once

#include <array>

#include "cht/nn/tensor.hpp"

namespace cht::nn {

// Per-axis (depth/time, height, width) settings. For rank-4 inputs the depth entries
// must be stride 1 / padding 0.
struct ConvParams {
    std::array<int, 3> stride{1, 1, 1};
    std::array<int, 3> padding{0, 0, 0};

    static ConvParams same(int kt, int kh, int kw) {
        return ConvParams{{1, 1, 1}, {kt / 2, kh / 2, kw / 2}};
    }
};

// Cross-correlation. x: [B, Cin, H, W] with w: [Cout, Cin, kH, kW], or
// x: [B, Cin, T, H, W] with w: [Cout, Cin, kT, kH, kW]; b: [Cout] or undefined.
template <typename T>
BasicTensor<T> conv(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& b,
                    const ConvParams& params = {});

// Non-overlapping max pool over (T, H, W) for rank 5 or (H, W) for rank 4; the first
// maximum wins ties. Dimensions must divide evenly.
template <typename T>
BasicTensor<T> max_pool(const BasicTensor<T>& x, std::array<int, 3> kernel);

// Nearest-neighbour upsampling of the last two axes.
template <typename T>
BasicTensor<T> upsample_nearest(const BasicTensor<T>& x, int factor_h, int factor_w);

// Concatenation along axis 1 (channels).
template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor);

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& a);

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& a);

}  // namespace cht::nn
