#include "cht/nn/ops.hpp"

#include <algorithm>
#include <cstring>

#include <Eigen/Core>

#include "cht/error.hpp"

namespace cht::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Strided = Eigen::OuterStride<>;

// Upper bound on im2col buffer elements; output rows are processed in chunks below it.
constexpr int64_t kColBudget = int64_t(1) << 20;

struct ConvGeom {
    int64_t batch, cin, depth, height, width;
    int64_t cout, kd, kh, kw;
    int64_t od, oh, ow;
    std::array<int, 3> stride, pad;
    bool pointwise;

    int64_t in_plane() const { return cin * depth * height * width; }
    int64_t out_spatial() const { return od * oh * ow; }
    int64_t k_size() const { return cin * kd * kh * kw; }
};

template <typename T>
ConvGeom conv_geometry(const BasicTensor<T>& x, const BasicTensor<T>& w, const ConvParams& p) {
    const int r = x.rank();
    if ((r != 4 && r != 5) || w.rank() != r) {
        throw ShapeError("conv: input " + shape_str(x.shape()) + " and weight " +
                         shape_str(w.shape()) + " must both be rank 4 or rank 5");
    }
    ConvGeom g{};
    g.batch = x.dim(0);
    g.cin = x.dim(1);
    g.cout = w.dim(0);
    if (w.dim(1) != g.cin) {
        throw ShapeError("conv: input " + shape_str(x.shape()) + " has " + std::to_string(g.cin) +
                         " channels but weight " + shape_str(w.shape()) + " expects " +
                         std::to_string(w.dim(1)));
    }
    if (r == 5) {
        g.depth = x.dim(2);
        g.kd = w.dim(2);
    } else {
        g.depth = 1;
        g.kd = 1;
        if (p.stride[0] != 1 || p.padding[0] != 0) {
            throw ShapeError("conv: 2D convolution with a depth stride/padding");
        }
    }
    g.height = x.dim(r - 2);
    g.width = x.dim(r - 1);
    g.kh = w.dim(r - 2);
    g.kw = w.dim(r - 1);
    g.stride = p.stride;
    g.pad = p.padding;
    auto out_len = [&](int64_t in, int64_t k, int s, int pd) -> int64_t {
        if (s < 1) throw ShapeError("conv: stride must be >= 1");
        const int64_t span = in + 2 * pd - k;
        if (span < 0) {
            throw ShapeError("conv: kernel " + shape_str(w.shape()) + " larger than padded input " +
                             shape_str(x.shape()));
        }
        return span / s + 1;
    };
    g.od = out_len(g.depth, g.kd, p.stride[0], p.padding[0]);
    g.oh = out_len(g.height, g.kh, p.stride[1], p.padding[1]);
    g.ow = out_len(g.width, g.kw, p.stride[2], p.padding[2]);
    g.pointwise = g.kd == 1 && g.kh == 1 && g.kw == 1 && p.stride == std::array<int, 3>{1, 1, 1} &&
                  p.padding == std::array<int, 3>{0, 0, 0};
    return g;
}

// Fills col[k][n] for output rows q in [q0, q1), q = od * oh + oh_idx.
template <typename T>
void im2col(const ConvGeom& g, const T* x, int64_t q0, int64_t q1, T* col) {
    const int64_t ncols = (q1 - q0) * g.ow;
    int64_t k = 0;
    for (int64_t ci = 0; ci < g.cin; ++ci)
        for (int64_t a = 0; a < g.kd; ++a)
            for (int64_t bh = 0; bh < g.kh; ++bh)
                for (int64_t cw = 0; cw < g.kw; ++cw, ++k) {
                    T* dst = col + k * ncols;
                    for (int64_t q = q0; q < q1; ++q) {
                        T* drow = dst + (q - q0) * g.ow;
                        const int64_t id = (q / g.oh) * g.stride[0] - g.pad[0] + a;
                        const int64_t ih = (q % g.oh) * g.stride[1] - g.pad[1] + bh;
                        if (id < 0 || id >= g.depth || ih < 0 || ih >= g.height) {
                            std::fill(drow, drow + g.ow, T(0));
                            continue;
                        }
                        const T* src = x + ((ci * g.depth + id) * g.height + ih) * g.width;
                        if (g.stride[2] == 1) {
                            const int64_t shift = cw - g.pad[2];
                            const int64_t lo = std::clamp<int64_t>(-shift, 0, g.ow);
                            const int64_t hi = std::clamp<int64_t>(g.width - shift, lo, g.ow);
                            std::fill(drow, drow + lo, T(0));
                            std::memcpy(drow + lo, src + lo + shift, sizeof(T) * (hi - lo));
                            std::fill(drow + hi, drow + g.ow, T(0));
                        } else {
                            for (int64_t o = 0; o < g.ow; ++o) {
                                const int64_t iw = o * g.stride[2] - g.pad[2] + cw;
                                drow[o] = (iw >= 0 && iw < g.width) ? src[iw] : T(0);
                            }
                        }
                    }
                }
}

template <typename T>
void col2im(const ConvGeom& g, const T* col, int64_t q0, int64_t q1, T* dx) {
    const int64_t ncols = (q1 - q0) * g.ow;
    int64_t k = 0;
    for (int64_t ci = 0; ci < g.cin; ++ci)
        for (int64_t a = 0; a < g.kd; ++a)
            for (int64_t bh = 0; bh < g.kh; ++bh)
                for (int64_t cw = 0; cw < g.kw; ++cw, ++k) {
                    const T* srcc = col + k * ncols;
                    for (int64_t q = q0; q < q1; ++q) {
                        const T* crow = srcc + (q - q0) * g.ow;
                        const int64_t id = (q / g.oh) * g.stride[0] - g.pad[0] + a;
                        const int64_t ih = (q % g.oh) * g.stride[1] - g.pad[1] + bh;
                        if (id < 0 || id >= g.depth || ih < 0 || ih >= g.height) continue;
                        T* drow = dx + ((ci * g.depth + id) * g.height + ih) * g.width;
                        for (int64_t o = 0; o < g.ow; ++o) {
                            const int64_t iw = o * g.stride[2] - g.pad[2] + cw;
                            if (iw >= 0 && iw < g.width) drow[iw] += crow[o];
                        }
                    }
                }
}

int64_t rows_per_chunk(const ConvGeom& g) {
    const int64_t per_row = std::max<int64_t>(1, g.k_size() * g.ow);
    return std::max<int64_t>(1, kColBudget / per_row);
}

}  // namespace

template <typename T>
BasicTensor<T> conv(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& b,
                    const ConvParams& params) {
    const ConvGeom g = conv_geometry(x, w, params);
    if (b.defined() && (b.rank() != 1 || b.dim(0) != g.cout)) {
        throw ShapeError("conv: bias " + shape_str(b.shape()) + " does not match weight " +
                         shape_str(w.shape()));
    }
    Shape out_shape = x.rank() == 5 ? Shape{g.batch, g.cout, g.od, g.oh, g.ow}
                                    : Shape{g.batch, g.cout, g.oh, g.ow};
    const int64_t n_out = g.out_spatial();
    const int64_t K = g.k_size();
    std::vector<T> out(static_cast<size_t>(g.batch * g.cout * n_out));

    const T* xd = x.data().data();
    const T* wd = w.data().data();
    Eigen::Map<const RowMat<T>> wmat(wd, g.cout, K);
    const int64_t chunk = rows_per_chunk(g);
    std::vector<T> col;
    if (!g.pointwise) col.resize(static_cast<size_t>(K * std::min(chunk, g.od * g.oh) * g.ow));

    for (int64_t bi = 0; bi < g.batch; ++bi) {
        const T* xb = xd + bi * g.in_plane();
        T* ob = out.data() + bi * g.cout * n_out;
        if (g.pointwise) {
            Eigen::Map<const RowMat<T>> xm(xb, K, n_out);
            Eigen::Map<RowMat<T>> om(ob, g.cout, n_out);
            om.noalias() = wmat * xm;
        } else {
            for (int64_t q0 = 0; q0 < g.od * g.oh; q0 += chunk) {
                const int64_t q1 = std::min(q0 + chunk, g.od * g.oh);
                const int64_t nc = (q1 - q0) * g.ow;
                im2col(g, xb, q0, q1, col.data());
                Eigen::Map<const RowMat<T>> cm(col.data(), K, nc);
                Eigen::Map<RowMat<T>, 0, Strided> om(ob + q0 * g.ow, g.cout, nc, Strided(n_out));
                om.noalias() = wmat * cm;
            }
        }
        if (b.defined()) {
            const T* bd = b.data().data();
            for (int64_t co = 0; co < g.cout; ++co) {
                T* row = ob + co * n_out;
                for (int64_t n = 0; n < n_out; ++n) row[n] += bd[co];
            }
        }
    }

    std::vector<std::shared_ptr<TensorNode<T>>> parents{x.node(), w.node()};
    if (b.defined()) parents.push_back(b.node());
    return make_result<T>(std::move(out_shape), std::move(out), std::move(parents),
                          [g](TensorNode<T>& self) {
        auto& xn = *self.parents[0];
        auto& wn = *self.parents[1];
        TensorNode<T>* bn = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
        const int64_t n_out = g.out_spatial();
        const int64_t K = g.k_size();
        const T* gout = self.grad.data();
        Eigen::Map<const RowMat<T>> wmat(wn.value.data(), g.cout, K);

        if (bn && bn->requires_grad) {
            for (int64_t bi = 0; bi < g.batch; ++bi)
                for (int64_t co = 0; co < g.cout; ++co) {
                    const T* row = gout + (bi * g.cout + co) * n_out;
                    T acc = T(0);
                    for (int64_t n = 0; n < n_out; ++n) acc += row[n];
                    bn->grad[co] += acc;
                }
        }
        const bool need_w = wn.requires_grad;
        const bool need_x = xn.requires_grad;
        if (!need_w && !need_x) return;

        const int64_t chunk = rows_per_chunk(g);
        std::vector<T> col, dcol;
        if (!g.pointwise) {
            col.resize(static_cast<size_t>(K * std::min(chunk, g.od * g.oh) * g.ow));
            dcol.resize(col.size());
        }
        RowMat<T> dw = RowMat<T>::Zero(g.cout, K);
        for (int64_t bi = 0; bi < g.batch; ++bi) {
            const T* xb = xn.value.data() + bi * g.in_plane();
            const T* gb = gout + bi * g.cout * n_out;
            if (g.pointwise) {
                Eigen::Map<const RowMat<T>> gm(gb, g.cout, n_out);
                if (need_w) {
                    Eigen::Map<const RowMat<T>> xm(xb, K, n_out);
                    dw.noalias() += gm * xm.transpose();
                }
                if (need_x) {
                    Eigen::Map<RowMat<T>> dxm(xn.grad.data() + bi * g.in_plane(), K, n_out);
                    dxm.noalias() += wmat.transpose() * gm;
                }
                continue;
            }
            for (int64_t q0 = 0; q0 < g.od * g.oh; q0 += chunk) {
                const int64_t q1 = std::min(q0 + chunk, g.od * g.oh);
                const int64_t nc = (q1 - q0) * g.ow;
                Eigen::Map<const RowMat<T>, 0, Strided> gm(gb + q0 * g.ow, g.cout, nc, Strided(n_out));
                if (need_w) {
                    im2col(g, xb, q0, q1, col.data());
                    Eigen::Map<const RowMat<T>> cm(col.data(), K, nc);
                    dw.noalias() += gm * cm.transpose();
                }
                if (need_x) {
                    Eigen::Map<RowMat<T>> dm(dcol.data(), K, nc);
                    dm.noalias() = wmat.transpose() * gm;
                    col2im(g, dcol.data(), q0, q1, xn.grad.data() + bi * g.in_plane());
                }
            }
        }
        if (need_w) {
            for (int64_t i = 0; i < g.cout * K; ++i) wn.grad[i] += dw.data()[i];
        }
    });
}

template <typename T>
BasicTensor<T> max_pool(const BasicTensor<T>& x, std::array<int, 3> kernel) {
    const int r = x.rank();
    if (r != 4 && r != 5) throw ShapeError("max_pool: rank 4 or 5 input expected, got " + shape_str(x.shape()));
    const int64_t bc = x.dim(0) * x.dim(1);
    const int64_t D = r == 5 ? x.dim(2) : 1;
    const int64_t H = x.dim(r - 2), W = x.dim(r - 1);
    const int64_t kd = r == 5 ? kernel[0] : 1, kh = kernel[1], kw = kernel[2];
    if (r == 4 && kernel[0] != 1) throw ShapeError("max_pool: depth kernel on a rank-4 input");
    if (kd < 1 || kh < 1 || kw < 1 || D % kd || H % kh || W % kw) {
        throw ShapeError("max_pool: kernel does not divide input " + shape_str(x.shape()));
    }
    const int64_t od = D / kd, oh = H / kh, ow = W / kw;
    Shape out_shape = x.shape();
    if (r == 5) out_shape[2] = od;
    out_shape[r - 2] = oh;
    out_shape[r - 1] = ow;
    std::vector<T> out(static_cast<size_t>(bc * od * oh * ow));
    auto argmax = std::make_shared<std::vector<int64_t>>(out.size());
    const T* xd = x.data().data();
    int64_t o = 0;
    for (int64_t p = 0; p < bc; ++p) {
        const int64_t base = p * D * H * W;
        for (int64_t d = 0; d < od; ++d)
            for (int64_t h = 0; h < oh; ++h)
                for (int64_t w = 0; w < ow; ++w, ++o) {
                    int64_t best = base + ((d * kd) * H + h * kh) * W + w * kw;
                    for (int64_t a = 0; a < kd; ++a)
                        for (int64_t b2 = 0; b2 < kh; ++b2)
                            for (int64_t c = 0; c < kw; ++c) {
                                const int64_t idx = base + ((d * kd + a) * H + h * kh + b2) * W + w * kw + c;
                                if (xd[idx] > xd[best]) best = idx;
                            }
                    out[o] = xd[best];
                    (*argmax)[o] = best;
                }
    }
    return make_result<T>(std::move(out_shape), std::move(out), {x.node()},
                          [argmax](TensorNode<T>& self) {
        auto& xg = self.parents[0]->grad;
        for (size_t i = 0; i < argmax->size(); ++i) xg[(*argmax)[i]] += self.grad[i];
    });
}

template <typename T>
BasicTensor<T> upsample_nearest(const BasicTensor<T>& x, int factor_h, int factor_w) {
    const int r = x.rank();
    if (r < 3 || factor_h < 1 || factor_w < 1) throw ShapeError("upsample_nearest: bad arguments");
    const int64_t H = x.dim(r - 2), W = x.dim(r - 1);
    const int64_t planes = x.numel() / (H * W);
    const int64_t OH = H * factor_h, OW = W * factor_w;
    Shape out_shape = x.shape();
    out_shape[r - 2] = OH;
    out_shape[r - 1] = OW;
    std::vector<T> out(static_cast<size_t>(planes * OH * OW));
    const T* xd = x.data().data();
    for (int64_t p = 0; p < planes; ++p)
        for (int64_t h = 0; h < OH; ++h) {
            const T* src = xd + (p * H + h / factor_h) * W;
            T* dst = out.data() + (p * OH + h) * OW;
            for (int64_t w = 0; w < OW; ++w) dst[w] = src[w / factor_w];
        }
    return make_result<T>(std::move(out_shape), std::move(out), {x.node()},
                          [planes, H, W, factor_h, factor_w](TensorNode<T>& self) {
        auto& xg = self.parents[0]->grad;
        const int64_t OH = H * factor_h, OW = W * factor_w;
        for (int64_t p = 0; p < planes; ++p)
            for (int64_t h = 0; h < OH; ++h) {
                T* dst = xg.data() + (p * H + h / factor_h) * W;
                const T* src = self.grad.data() + (p * OH + h) * OW;
                for (int64_t w = 0; w < OW; ++w) dst[w / factor_w] += src[w];
            }
    });
}

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (a.rank() != b.rank() || a.rank() < 2 || a.dim(0) != b.dim(0)) {
        throw ShapeError("concat: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    for (int i = 2; i < a.rank(); ++i) {
        if (a.dim(i) != b.dim(i)) {
            throw ShapeError("concat: incompatible shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
        }
    }
    const int64_t batch = a.dim(0);
    const int64_t sa = a.numel() / batch, sb = b.numel() / batch;
    Shape out_shape = a.shape();
    out_shape[1] += b.dim(1);
    std::vector<T> out(static_cast<size_t>(a.numel() + b.numel()));
    for (int64_t i = 0; i < batch; ++i) {
        std::copy_n(a.data().data() + i * sa, sa, out.data() + i * (sa + sb));
        std::copy_n(b.data().data() + i * sb, sb, out.data() + i * (sa + sb) + sa);
    }
    return make_result<T>(std::move(out_shape), std::move(out), {a.node(), b.node()},
                          [batch, sa, sb](TensorNode<T>& self) {
        auto& an = *self.parents[0];
        auto& bn = *self.parents[1];
        for (int64_t i = 0; i < batch; ++i) {
            const T* g = self.grad.data() + i * (sa + sb);
            if (an.requires_grad)
                for (int64_t k = 0; k < sa; ++k) an.grad[i * sa + k] += g[k];
            if (bn.requires_grad)
                for (int64_t k = 0; k < sb; ++k) bn.grad[i * sb + k] += g[sa + k];
        }
    });
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
    if (numel(shape) != x.numel()) {
        throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
    }
    std::vector<T> v(x.data().begin(), x.data().end());
    return make_result<T>(std::move(shape), std::move(v), {x.node()}, [](TensorNode<T>& self) {
        auto& xg = self.parents[0]->grad;
        for (size_t i = 0; i < xg.size(); ++i) xg[i] += self.grad[i];
    });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
    std::vector<T> v(x.data().begin(), x.data().end());
    for (auto& e : v) e = e > T(0) ? e : T(0);
    return make_result<T>(x.shape(), std::move(v), {x.node()}, [](TensorNode<T>& self) {
        auto& xn = *self.parents[0];
        for (size_t i = 0; i < xn.grad.size(); ++i)
            if (xn.value[i] > T(0)) xn.grad[i] += self.grad[i];
    });
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("add: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    std::vector<T> v(a.data().begin(), a.data().end());
    for (size_t i = 0; i < v.size(); ++i) v[i] += b.data()[i];
    return make_result<T>(a.shape(), std::move(v), {a.node(), b.node()}, [](TensorNode<T>& self) {
        for (auto& p : self.parents)
            if (p->requires_grad)
                for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += self.grad[i];
    });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("mul: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    std::vector<T> v(a.data().begin(), a.data().end());
    for (size_t i = 0; i < v.size(); ++i) v[i] *= b.data()[i];
    return make_result<T>(a.shape(), std::move(v), {a.node(), b.node()}, [](TensorNode<T>& self) {
        auto& an = *self.parents[0];
        auto& bn = *self.parents[1];
        for (size_t i = 0; i < self.grad.size(); ++i) {
            if (an.requires_grad) an.grad[i] += self.grad[i] * bn.value[i];
            if (bn.requires_grad) bn.grad[i] += self.grad[i] * an.value[i];
        }
    });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor) {
    std::vector<T> v(a.data().begin(), a.data().end());
    for (auto& e : v) e *= factor;
    return make_result<T>(a.shape(), std::move(v), {a.node()}, [factor](TensorNode<T>& self) {
        auto& g = self.parents[0]->grad;
        for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& a) {
    T acc = T(0);
    for (auto e : a.data()) acc += e;
    return make_result<T>({}, {acc}, {a.node()}, [](TensorNode<T>& self) {
        auto& g = self.parents[0]->grad;
        for (auto& e : g) e += self.grad[0];
    });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& a) {
    if (a.numel() == 0) throw ShapeError("mean of empty tensor");
    return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

#define CHT_INSTANTIATE_OPS(T)                                                                    \
    template BasicTensor<T> conv(const BasicTensor<T>&, const BasicTensor<T>&,                    \
                                 const BasicTensor<T>&, const ConvParams&);                       \
    template BasicTensor<T> max_pool(const BasicTensor<T>&, std::array<int, 3>);                  \
    template BasicTensor<T> upsample_nearest(const BasicTensor<T>&, int, int);                    \
    template BasicTensor<T> concat_channels(const BasicTensor<T>&, const BasicTensor<T>&);        \
    template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                \
    template BasicTensor<T> relu(const BasicTensor<T>&);                                          \
    template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                    \
    template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                    \
    template BasicTensor<T> scale(const BasicTensor<T>&, T);                                      \
    template BasicTensor<T> sum(const BasicTensor<T>&);                                           \
    template BasicTensor<T> mean(const BasicTensor<T>&);

CHT_INSTANTIATE_OPS(float)
CHT_INSTANTIATE_OPS(double)

}  // namespace cht::nn
