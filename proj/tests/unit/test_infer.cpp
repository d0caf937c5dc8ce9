#include "doctest.h"

#include <fstream>
#include <random>
#include <thread>

#include "cht/error.hpp"
#include "cht/geodata/archive.hpp"
#include "cht/infer/pipeline.hpp"
#include "cht/infer/queue.hpp"
#include "cht/infer/tiles.hpp"
#include "cht/synth/dataset.hpp"
#include "test_support.hpp"

using namespace cht;
using namespace cht::infer;

namespace {

// Counts, for every pixel of the extent, how many cores contain it.
std::vector<int> core_coverage(const TilePlan& plan) {
    std::vector<int> cover(static_cast<size_t>(plan.height) * plan.width, 0);
    for (const auto& w : plan.windows)
        for (int r = w.core_row0; r < w.core_row0 + w.core_h; ++r)
            for (int c = w.core_col0; c < w.core_col0 + w.core_w; ++c) ++cover[static_cast<size_t>(r) * plan.width + c];
    return cover;
}

void check_plan(const TilePlan& plan) {
    for (int v : core_coverage(plan)) REQUIRE(v == 1);
    for (const auto& w : plan.windows) {
        CHECK(w.row0 >= 0);
        CHECK(w.col0 >= 0);
        CHECK(w.row0 + w.h <= plan.height);
        CHECK(w.col0 + w.w <= plan.width);
        CHECK(w.h == std::min(plan.window, plan.height));
        CHECK(w.w == std::min(plan.window, plan.width));
        // Cores sit inside their window, at least a margin away from interior window edges.
        CHECK(w.core_row0 >= w.row0);
        CHECK(w.core_row0 + w.core_h <= w.row0 + w.h);
        if (w.core_row0 > 0) CHECK(w.core_row0 - w.row0 >= plan.margin);
        if (w.core_col0 > 0) CHECK(w.core_col0 - w.col0 >= plan.margin);
        if (w.core_row0 + w.core_h < plan.height) CHECK(w.row0 + w.h - (w.core_row0 + w.core_h) >= plan.margin);
        if (w.core_col0 + w.core_w < plan.width) CHECK(w.col0 + w.w - (w.core_col0 + w.core_w) >= plan.margin);
    }
}

}  // namespace

TEST_CASE("tile plans") {
    const auto one = plan_tiles(256, 256);
    REQUIRE(one.windows.size() == 1);
    CHECK(one.windows[0] == TileWindow{0, 0, 0, 256, 256, 0, 0, 256, 256});

    const auto big = plan_tiles(512, 512, 256, 32);
    check_plan(big);
    CHECK(big.windows.size() == 9);

    for (int h = 16; h <= 45; ++h)
        for (int w = 16; w <= 45; w += 3) check_plan(plan_tiles(h, w, 16, 4));

    const auto small = plan_tiles(24, 40, 32, 4, 8);
    CHECK(small.windows.size() == 2);
    CHECK(small.windows[0].h == 24);
    check_plan(small);
    CHECK_THROWS_AS(plan_tiles(20, 40, 32, 4, 8), CapacityError);
    CHECK_THROWS_AS(plan_tiles(64, 64, 16, 8), DomainError);
}

TEST_CASE("stitching copies cores only") {
    const auto plan = plan_tiles(40, 52, 16, 4);
    std::map<int, std::vector<float>> constant, random;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<float> u(0, 1);
    for (const auto& w : plan.windows) {
        constant[w.id] = std::vector<float>(static_cast<size_t>(w.h) * w.w, 7.5f);
        auto& v = random[w.id];
        for (int i = 0; i < w.h * w.w; ++i) v.push_back(u(rng));
    }
    for (float v : stitch(constant, plan)) CHECK(v == 7.5f);

    const auto out = stitch(random, plan);
    for (int r = 0; r < plan.height; ++r) {
        for (int c = 0; c < plan.width; ++c) {
            // Direct lookup: the unique window whose core holds (r, c).
            for (const auto& w : plan.windows) {
                if (r >= w.core_row0 && r < w.core_row0 + w.core_h && c >= w.core_col0 && c < w.core_col0 + w.core_w) {
                    CHECK(out[r * plan.width + c] == random[w.id][(r - w.row0) * w.w + (c - w.col0)]);
                }
            }
        }
    }

    const auto single = plan_tiles(16, 16, 16, 4);
    CHECK(stitch({{0, random.at(0)}}, single) == random.at(0));

    auto missing = random;
    missing.erase(2);
    missing.erase(5);
    try {
        stitch(missing, plan);
        FAIL("expected IncompleteError");
    } catch (const IncompleteError& e) {
        CHECK(std::string(e.what()).find("2, 5") != std::string::npos);
    }
}

TEST_CASE("bounded queue respects its capacity") {
    BoundedQueue<int> q(3);
    std::vector<std::thread> producers;
    std::atomic<long> sum{0};
    for (int p = 0; p < 4; ++p) {
        producers.emplace_back([&, p] {
            for (int i = 0; i < 500; ++i) q.push(p * 1000 + i);
        });
    }
    std::thread consumer([&] {
        while (auto v = q.pop()) sum += *v;
    });
    for (auto& t : producers) t.join();
    q.close();
    consumer.join();
    long expected = 0;
    for (int p = 0; p < 4; ++p)
        for (int i = 0; i < 500; ++i) expected += p * 1000 + i;
    CHECK(sum == expected);
    CHECK(q.high_water() <= 3);
    CHECK_FALSE(q.push(1));
    CHECK_FALSE(q.pop().has_value());
}

TEST_CASE("pipeline output matches the sequential reference bit for bit") {
    const auto dir = test::temp_dir("pipeline");
    synth::SceneConfig sc;
    sc.seed = 3;
    sc.size_px = 64;
    const auto truth = synth::gen_truth(sc);
    std::vector<std::filesystem::path> paths;
    for (int year : {2020, 2021}) {
        const auto product = synth::preprocess_year(truth, year, 1);
        for (const auto& s : synth::cut_samples(product, 32, 1)) {
            paths.push_back(dir / (s.patch_id + ".zip"));
            geodata::archive_write(s, paths.back());
        }
    }
    nn::Checkpoint ckpt;
    ckpt.spec.variant = nn::ConvKind::conv2d;
    ckpt.spec.in_channels = 16;
    ckpt.spec.base_channels = 4;
    ckpt.spec.depth = 3;
    ckpt.params = nn::param_init<float>(ckpt.spec, 5);
    auto bias = ckpt.params.get("head.bias");
    bias.data()[0] = 10.0f;

    PipelineConfig cfg;
    cfg.variant = preprocess::Variant::composite2d;
    cfg.window = 16;
    cfg.margin = 4;
    const auto ref = run_sequential(paths, ckpt, cfg);
    REQUIRE(ref.size() == paths.size());
    for (auto [d, i] : {std::pair{1, 1}, {4, 2}, {2, 4}}) {
        cfg.decoders = d;
        cfg.inferrers = i;
        PipelineStats stats;
        const auto got = run_pipeline(paths, ckpt, cfg, &stats);
        REQUIRE(got.size() == ref.size());
        for (size_t k = 0; k < got.size(); ++k) {
            CHECK(got[k].patch_id == ref[k].patch_id);
            CHECK(got[k].heights == ref[k].heights);
        }
        CHECK(stats.queue_capacity == 2 * static_cast<size_t>(i));
        CHECK(stats.queue_high_water <= stats.queue_capacity);
        CHECK(stats.windows == paths.size() * plan_tiles(32, 32, 16, 4).windows.size());
    }
    CHECK(ref[0].heights.same_grid(geodata::archive_read(paths[0]).s1_composite));

    SUBCASE("variant mismatch is a configuration error") {
        cfg.variant = preprocess::Variant::stack3d;
        CHECK_THROWS_AS(run_pipeline(paths, ckpt, cfg), ConfigError);
        cfg.variant = preprocess::Variant::stack2d;
        CHECK_THROWS_AS(run_pipeline(paths, ckpt, cfg), ConfigError);
    }
    SUBCASE("a broken archive stops the pipeline with a partial report") {
        const auto bad = dir / "broken.zip";
        std::ofstream(bad) << "not an archive";
        auto with_bad = paths;
        with_bad.push_back(bad);
        cfg.decoders = 2;
        cfg.inferrers = 2;
        try {
            run_pipeline(with_bad, ckpt, cfg);
            FAIL("expected IncompleteError");
        } catch (const IncompleteError& e) {
            const std::string what = e.what();
            CHECK(what.find("not completed") != std::string::npos);
            CHECK(what.find("broken.zip") != std::string::npos);
        }
    }
}
