#include "doctest.h"

#include <random>

#include "cht/error.hpp"
#include "cht/nn/ops.hpp"
#include "cht/nn/tensor.hpp"
#include "cht/nn/unet.hpp"
#include "../support/oracles.hpp"
#include "test_support.hpp"

using namespace cht;
using namespace cht::nn;

namespace {

TensorD linear_probe(const TensorD& out, uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto r = oracle::random_tensor(rng, out.shape());
    return sum(mul(out, r));
}

UNetSpec tiny_spec(ConvKind kind) {
    UNetSpec s;
    s.variant = kind;
    s.in_channels = 3;
    s.base_channels = 2;
    s.depth = 3;
    s.temporal_schedule = kind == ConvKind::conv3d ? std::vector<int>{2, 2} : std::vector<int>{};
    return s;
}

}  // namespace

TEST_CASE("tensor construction checks length") {
    CHECK_THROWS_AS(Tensor::from({2, 3}, std::vector<float>(5)), ShapeError);
    auto t = Tensor::zeros({2, 3});
    CHECK(t.numel() == 6);
    CHECK(shape_str(t.shape()) == "[2, 3]");
}

TEST_CASE("conv identity kernel") {
    std::mt19937_64 rng(1);
    auto x = oracle::random_tensor(rng, {2, 3, 4, 5, 6});
    std::vector<double> w(3 * 3, 0.0);
    for (int c = 0; c < 3; ++c) w[c * 3 + c] = 1.0;
    auto out = conv(x, TensorD::from({3, 3, 1, 1, 1}, w), TensorD::zeros({3}));
    CHECK(out.shape() == x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) CHECK(out.data()[i] == x.data()[i]);

    auto x2 = oracle::random_tensor(rng, {1, 2, 5, 5});
    auto out2 = conv(x2, TensorD::from({2, 2, 1, 1}, {1, 0, 0, 1}), TensorD());
    for (int64_t i = 0; i < x2.numel(); ++i) CHECK(out2.data()[i] == x2.data()[i]);
}

TEST_CASE("3x3 averaging kernel preserves a constant interior") {
    auto x = Tensor::full({1, 1, 6, 6}, 4.5f);
    auto w = Tensor::full({1, 1, 3, 3}, 1.0f / 9.0f);
    auto out = conv(x, w, Tensor::zeros({1}), ConvParams::same(1, 3, 3));
    for (int r = 1; r < 5; ++r)
        for (int c = 1; c < 5; ++c) CHECK(out.data()[r * 6 + c] == doctest::Approx(4.5f).epsilon(1e-6));
}

TEST_CASE("conv matches the direct-sum oracle on random small shapes") {
    std::mt19937_64 rng(42);
    double worst = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
        auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng() % (hi - lo + 1)); };
        const bool is3d = trial % 2 == 0;
        const int B = pick(1, 2), Cin = pick(1, 3), Cout = pick(1, 3);
        const int D = is3d ? pick(1, 6) : 1, H = pick(1, 6), W = pick(1, 6);
        const int kd = is3d ? pick(1, std::min(D, 3)) : 1, kh = pick(1, std::min(H, 3)), kw = pick(1, std::min(W, 3));
        const int sd = is3d ? pick(1, 2) : 1, sh = pick(1, 2), sw = pick(1, 2);
        const int pd = is3d ? pick(0, kd / 2) : 0, ph = pick(0, kh / 2), pw = pick(0, kw / 2);
        Shape xs = is3d ? Shape{B, Cin, D, H, W} : Shape{B, Cin, H, W};
        Shape ws = is3d ? Shape{Cout, Cin, kd, kh, kw} : Shape{Cout, Cin, kh, kw};
        auto x = oracle::random_tensor(rng, xs);
        auto w = oracle::random_tensor(rng, ws);
        auto b = oracle::random_tensor(rng, {Cout});
        auto out = conv(cast<float>(x), cast<float>(w), cast<float>(b),
                        ConvParams{{sd, sh, sw}, {pd, ph, pw}});
        int Do, Ho, Wo;
        auto ref = oracle::conv_direct({x.data().begin(), x.data().end()}, {w.data().begin(), w.data().end()},
                                       {b.data().begin(), b.data().end()}, B, Cin, D, H, W, Cout, kd, kh,
                                       kw, sd, sh, sw, pd, ph, pw, Do, Ho, Wo);
        REQUIRE(static_cast<size_t>(out.numel()) == ref.size());
        for (size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(out.data()[i] - ref[i]));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("conv shape errors mention both shapes") {
    auto x = Tensor::zeros({1, 3, 4, 4});
    auto w = Tensor::zeros({2, 2, 3, 3});
    try {
        conv(x, w, Tensor());
        FAIL("expected shape error");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[1, 3, 4, 4]") != std::string::npos);
        CHECK(msg.find("[2, 2, 3, 3]") != std::string::npos);
    }
}

TEST_CASE("backward examples") {
    std::mt19937_64 rng(2);
    auto x = oracle::random_tensor(rng, {3, 4});
    x.set_requires_grad(true);
    backward(sum(x));
    for (auto g : x.grad()) CHECK(g == 1.0);
    backward(sum(x));  // accumulates
    for (auto g : x.grad()) CHECK(g == 2.0);

    x.zero_grad();
    backward(scale(sum(mul(x, x)), 0.5));
    for (int64_t i = 0; i < x.numel(); ++i) CHECK(x.grad()[i] == doctest::Approx(x.data()[i]));

    CHECK_THROWS_AS(backward(x), DomainError);
}

TEST_CASE("inference builds no graph") {
    auto x = Tensor::full({1, 1, 2, 2}, 1.0f);
    auto y = relu(x);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.node()->parents.empty());
}

TEST_CASE("gradient check: individual ops") {
    std::mt19937_64 rng(3);
    SUBCASE("conv2d") {
        auto x = oracle::random_tensor(rng, {2, 2, 5, 4});
        auto w = oracle::random_tensor(rng, {3, 2, 3, 3});
        auto b = oracle::random_tensor(rng, {3});
        auto r = oracle::grad_check({x, w, b}, [&] {
            return linear_probe(conv(x, w, b, ConvParams{{1, 2, 1}, {0, 1, 1}}), 9);
        });
        CHECK(r.max_rel_error < 1e-4);
    }
    SUBCASE("conv3d") {
        auto x = oracle::random_tensor(rng, {1, 2, 4, 4, 3});
        auto w = oracle::random_tensor(rng, {2, 2, 3, 3, 2});
        auto b = oracle::random_tensor(rng, {2});
        auto r = oracle::grad_check({x, w, b}, [&] {
            return linear_probe(conv(x, w, b, ConvParams{{1, 1, 1}, {1, 1, 0}}), 10);
        });
        CHECK(r.max_rel_error < 1e-4);
    }
    SUBCASE("max pool 3d") {
        auto x = oracle::random_tensor(rng, {1, 2, 4, 4, 6});
        auto r = oracle::grad_check({x}, [&] { return linear_probe(max_pool(x, {2, 2, 3}), 11); });
        CHECK(r.max_rel_error < 1e-4);
    }
    SUBCASE("upsample + concat + relu") {
        auto a = oracle::random_tensor(rng, {2, 2, 3, 3});
        auto b = oracle::random_tensor(rng, {2, 1, 6, 6});
        auto r = oracle::grad_check({a, b}, [&] {
            return linear_probe(relu(concat_channels(upsample_nearest(a, 2, 2), b)), 12);
        });
        CHECK(r.max_rel_error < 1e-4);
    }
    SUBCASE("reshape + mean") {
        auto a = oracle::random_tensor(rng, {2, 3, 1, 2, 2});
        auto r = oracle::grad_check({a}, [&] {
            auto s = reshape(a, {2, 3, 2, 2});
            return mean(mul(s, s));
        });
        CHECK(r.max_rel_error < 1e-4);
    }
}

TEST_CASE("gradient check: tiny U-Nets") {
    for (auto kind : {ConvKind::conv2d, ConvKind::conv3d}) {
        auto spec = tiny_spec(kind);
        auto params = param_init<double>(spec, 5);
        CHECK(params.count() <= 5000);
        std::mt19937_64 rng(1);
        auto x = kind == ConvKind::conv3d ? oracle::random_tensor(rng, {1, 3, 4, 8, 8})
                                          : oracle::random_tensor(rng, {1, 3, 8, 8});
        oracle::move_to_generic_point(spec, params, x, rng);
        std::vector<TensorD> leaves = params.tensors();
        leaves.push_back(x);
        auto r = oracle::grad_check(leaves, [&] { return linear_probe(unet_forward(spec, params, x), 13); },
                                    1e-3, 40);
        INFO("kink-adjacent coordinates: " << r.kink_adjacent << " of " << r.coordinates);
        CHECK(r.max_rel_error < 1e-4);
        CHECK(r.live_fraction > 0.5);
    }
}

TEST_CASE("unet output shape and temporal collapse") {
    UNetSpec spec;  // 3D, depth 4, schedule [2, 2, 3]
    spec.base_channels = 2;
    auto params = param_init<float>(spec, 1);
    std::mt19937_64 rng(1);
    auto x = cast<float>(oracle::random_tensor(rng, {2, 16, 12, 64, 64}, 0.0, 1.0));
    UNetTrace trace;
    auto out = unet_forward(spec, params, x, &trace);
    CHECK(out.shape() == Shape{2, 1, 64, 64});
    CHECK(trace.bottleneck[2] == 1);
    CHECK(trace.encoder[0][2] == 12);
    CHECK(trace.encoder[1][2] == 6);
    CHECK(trace.encoder[2][2] == 3);
    for (const auto& s : trace.skips) CHECK(s.size() == 4);
    float lo = 1e9f;
    for (auto v : out.data()) lo = std::min(lo, v);
    CHECK(lo >= 0.0f);
}

TEST_CASE("unet rejects indivisible sizes and wrong time length") {
    UNetSpec spec;
    spec.base_channels = 2;
    auto params = param_init<float>(spec, 1);
    CHECK_THROWS_AS(unet_forward(spec, params, Tensor::zeros({1, 16, 12, 20, 16})), ShapeError);
    CHECK_THROWS_AS(unet_forward(spec, params, Tensor::zeros({1, 16, 6, 16, 16})), ShapeError);
    UNetSpec bad = spec;
    bad.temporal_schedule = {2, 6};
    CHECK_THROWS_AS(validate_spec(bad), ConfigError);
}

TEST_CASE("2D unet on 148 channels") {
    UNetSpec spec;
    spec.variant = ConvKind::conv2d;
    spec.in_channels = 148;
    spec.base_channels = 4;
    spec.temporal_schedule.clear();
    auto params = param_init<float>(spec, 3);
    auto out = unet_forward(spec, params, Tensor::full({1, 148, 16, 16}, 0.3f));
    CHECK(out.shape() == Shape{1, 1, 16, 16});
}

TEST_CASE("param_init determinism and statistics") {
    UNetSpec spec;
    spec.base_channels = 16;
    auto a = param_init<float>(spec, 77);
    auto b = param_init<float>(spec, 77);
    auto c = param_init<float>(spec, 78);
    bool differs = false;
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(std::equal(a.tensors()[i].data().begin(), a.tensors()[i].data().end(),
                         b.tensors()[i].data().begin()));
        differs = differs || !std::equal(a.tensors()[i].data().begin(), a.tensors()[i].data().end(),
                                         c.tensors()[i].data().begin());
        if (a.names()[i].ends_with(".bias")) {
            for (auto v : a.tensors()[i].data()) CHECK(v == 0.0f);
        } else if (a.tensors()[i].numel() >= 10000) {
            const auto& t = a.tensors()[i];
            const double fan_in = static_cast<double>(t.numel() / t.dim(0));
            double s2 = 0.0;
            for (auto v : t.data()) s2 += static_cast<double>(v) * v;
            const double var = s2 / static_cast<double>(t.numel());
            CHECK(var * fan_in > 0.8);
            CHECK(var * fan_in < 1.2);
        }
    }
    CHECK(differs);
}

TEST_CASE("3D network is invariant to permuting identical time slices") {
    UNetSpec spec;
    spec.base_channels = 2;
    spec.in_channels = 2;
    auto params = param_init<float>(spec, 4);
    std::mt19937_64 rng(8);
    auto slice = oracle::random_tensor(rng, {1, 2, 1, 16, 16}, 0.0, 1.0);
    std::vector<float> v;
    for (int c = 0; c < 2; ++c)
        for (int t = 0; t < 12; ++t)
            for (int k = 0; k < 256; ++k) v.push_back(static_cast<float>(slice.data()[c * 256 + k]));
    auto x = Tensor::from({1, 2, 12, 16, 16}, v);
    std::vector<int> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<float> pv(v.size());
    for (int c = 0; c < 2; ++c)
        for (int t = 0; t < 12; ++t)
            std::copy_n(v.begin() + (c * 12 + perm[t]) * 256, 256, pv.begin() + (c * 12 + t) * 256);
    auto a = unet_forward(spec, params, x);
    auto b = unet_forward(spec, params, Tensor::from({1, 2, 12, 16, 16}, pv));
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST_CASE("checkpoint round trip is bit-exact") {
    auto dir = test::temp_dir("ckpt");
    UNetSpec spec;
    spec.base_channels = 3;
    Checkpoint ck{spec, param_init<float>(spec, 9), {{"note", "x"}}};
    save_checkpoint(dir / "m.ckpt", ck);
    auto back = load_checkpoint(dir / "m.ckpt");
    CHECK(back.spec == spec);
    CHECK(back.meta["note"] == "x");
    REQUIRE(back.params.names() == ck.params.names());
    for (size_t i = 0; i < ck.params.size(); ++i) {
        CHECK(back.params.tensors()[i].shape() == ck.params.tensors()[i].shape());
        CHECK(std::memcmp(back.params.tensors()[i].data().data(), ck.params.tensors()[i].data().data(),
                          sizeof(float) * ck.params.tensors()[i].numel()) == 0);
    }
    UNetSpec other = spec;
    other.base_channels = 4;
    Checkpoint wrong{other, ck.params, {}};
    save_checkpoint(dir / "w.ckpt", wrong);
    CHECK_THROWS_AS(load_checkpoint(dir / "w.ckpt"), ConfigError);
}
