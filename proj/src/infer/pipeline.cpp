#include "cht/infer/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "cht/error.hpp"
#include "cht/geodata/archive.hpp"
#include "cht/infer/queue.hpp"

namespace cht::infer {

namespace {

struct WorkItem {
    size_t archive = 0;
    int window = 0;
    nn::Tensor input;  // [1, C, (T,) h, w]
};

struct WindowOutput {
    size_t archive = 0;
    int window = 0;
    std::vector<float> values;
};

struct Decoded {
    geodata::SampleArchive sample;
    nn::Tensor input;
    TilePlan plan;
};

void check_variant(const nn::Checkpoint& ckpt, preprocess::Variant v) {
    const bool is3d = v == preprocess::Variant::stack3d;
    if (is3d != (ckpt.spec.variant == nn::ConvKind::conv3d)) {
        throw ConfigError("variant", std::string("checkpoint network does not match variant ") +
                                         preprocess::variant_name(v));
    }
}

Decoded decode(const std::filesystem::path& path, const nn::Checkpoint& ckpt, const PipelineConfig& cfg) {
    Decoded d;
    d.sample = geodata::archive_read(path);
    d.input = preprocess::build_model_input(d.sample, cfg.variant);
    if (d.input.dim(0) != ckpt.spec.in_channels) {
        throw ConfigError("variant", path.string() + " yields " + std::to_string(d.input.dim(0)) +
                                         " input channels, the checkpoint expects " +
                                         std::to_string(ckpt.spec.in_channels));
    }
    const int multiple = 1 << (ckpt.spec.depth - 1);
    d.plan = plan_tiles(d.sample.height(), d.sample.width(), cfg.window, cfg.margin, multiple);
    return d;
}

nn::Tensor crop_window(const nn::Tensor& x, const TileWindow& w) {
    const auto& s = x.shape();
    const int64_t H = s[s.size() - 2], W = s[s.size() - 1];
    int64_t planes = 1;
    for (size_t i = 0; i + 2 < s.size(); ++i) planes *= s[i];
    std::vector<float> out(static_cast<size_t>(planes) * w.h * w.w);
    const auto d = x.data();
    for (int64_t p = 0; p < planes; ++p) {
        for (int r = 0; r < w.h; ++r) {
            const float* src = d.data() + (p * H + w.row0 + r) * W + w.col0;
            std::copy(src, src + w.w, out.begin() + (static_cast<size_t>(p) * w.h + r) * w.w);
        }
    }
    nn::Shape shape{1};
    shape.insert(shape.end(), s.begin(), s.end());
    shape[shape.size() - 2] = w.h;
    shape[shape.size() - 1] = w.w;
    return nn::Tensor::from(shape, std::move(out));
}

std::vector<float> infer_window(const nn::Checkpoint& ckpt, const nn::Tensor& x) {
    const auto y = nn::unet_forward(ckpt.spec, ckpt.params, x);
    return std::vector<float>(y.data().begin(), y.data().end());
}

ArchiveResult assemble(const Decoded& d, const std::map<int, std::vector<float>>& outputs) {
    const auto& ref = d.sample.s1_composite;
    return {d.sample.patch_id, d.sample.year,
            geodata::RasterPatch(ref.origin(), ref.resolution(), {"height"}, ref.height(), ref.width(),
                                 stitch(outputs, d.plan))};
}

void validate(const std::vector<std::filesystem::path>& archives, const nn::Checkpoint& ckpt,
              const PipelineConfig& cfg) {
    if (cfg.decoders < 1) throw ConfigError("decoders", "must be >= 1");
    if (cfg.inferrers < 1) throw ConfigError("inferrers", "must be >= 1");
    if (archives.empty()) throw MissingDataError("run_pipeline: no archives");
    check_variant(ckpt, cfg.variant);
}

}  // namespace

std::vector<ArchiveResult> run_sequential(const std::vector<std::filesystem::path>& archives,
                                          const nn::Checkpoint& checkpoint, const PipelineConfig& cfg) {
    validate(archives, checkpoint, cfg);
    std::vector<ArchiveResult> out;
    for (const auto& path : archives) {
        const auto d = decode(path, checkpoint, cfg);
        std::map<int, std::vector<float>> outputs;
        for (const auto& w : d.plan.windows) outputs[w.id] = infer_window(checkpoint, crop_window(d.input, w));
        out.push_back(assemble(d, outputs));
    }
    return out;
}

std::vector<ArchiveResult> run_pipeline(const std::vector<std::filesystem::path>& archives,
                                        const nn::Checkpoint& checkpoint, const PipelineConfig& cfg,
                                        PipelineStats* stats) {
    validate(archives, checkpoint, cfg);
    const auto t0 = std::chrono::steady_clock::now();
    BoundedQueue<WorkItem> work(2 * static_cast<size_t>(cfg.inferrers));
    BoundedQueue<WindowOutput> done(2 * static_cast<size_t>(cfg.inferrers));

    std::mutex mu;  // guards decoded, results, failure
    std::vector<std::unique_ptr<Decoded>> decoded(archives.size());
    std::vector<std::optional<ArchiveResult>> results(archives.size());
    std::exception_ptr failure;
    std::atomic<size_t> next{0};
    std::atomic<size_t> windows{0};

    auto fail = [&](std::exception_ptr e) {
        {
            std::lock_guard lock(mu);
            if (!failure) failure = e;
        }
        work.close();
        done.close();
    };

    auto decoder = [&] {
        try {
            for (size_t i = next++; i < archives.size(); i = next++) {
                auto d = std::make_unique<Decoded>(decode(archives[i], checkpoint, cfg));
                const Decoded* view = d.get();
                {
                    std::lock_guard lock(mu);
                    decoded[i] = std::move(d);
                }
                for (const auto& w : view->plan.windows) {
                    if (!work.push({i, w.id, crop_window(view->input, w)})) return;
                }
            }
        } catch (...) {
            fail(std::current_exception());
        }
    };
    auto inferrer = [&] {
        try {
            while (auto item = work.pop()) {
                if (!done.push({item->archive, item->window, infer_window(checkpoint, item->input)})) return;
            }
        } catch (...) {
            fail(std::current_exception());
        }
    };
    auto writer = [&] {
        try {
            std::vector<std::map<int, std::vector<float>>> pending(archives.size());
            size_t finished = 0;
            while (auto out = done.pop()) {
                ++windows;
                auto& p = pending[out->archive];
                p[out->window] = std::move(out->values);
                const Decoded* d = nullptr;
                {
                    std::lock_guard lock(mu);
                    d = decoded[out->archive].get();
                }
                if (p.size() == d->plan.windows.size()) {
                    auto r = assemble(*d, p);
                    p.clear();
                    ++finished;
                    if (cfg.progress) {
                        cfg.progress("archive " + std::to_string(finished) + "/" + std::to_string(archives.size()) +
                                     " " + r.patch_id);
                    }
                    std::lock_guard lock(mu);
                    results[out->archive] = std::move(r);
                    decoded[out->archive].reset();
                }
            }
        } catch (...) {
            fail(std::current_exception());
        }
    };

    std::vector<std::thread> decoders, inferrers;
    std::thread writer_thread(writer);
    for (int i = 0; i < cfg.inferrers; ++i) inferrers.emplace_back(inferrer);
    for (int i = 0; i < cfg.decoders; ++i) decoders.emplace_back(decoder);
    for (auto& t : decoders) t.join();
    work.close();
    for (auto& t : inferrers) t.join();
    done.close();
    writer_thread.join();

    if (stats) {
        stats->queue_capacity = work.capacity();
        stats->queue_high_water = work.high_water();
        stats->windows = windows;
        stats->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    if (failure) {
        std::string cause;
        try {
            std::rethrow_exception(failure);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            cause = e.what();
        }
        std::string complete, missing;
        for (size_t i = 0; i < archives.size(); ++i) {
            auto& s = results[i] ? complete : missing;
            s += (s.empty() ? "" : ", ") + archives[i].filename().string();
        }
        throw IncompleteError("pipeline stopped: " + cause + "; completed [" + complete + "]; not completed [" +
                              missing + "]");
    }
    std::vector<ArchiveResult> out;
    for (auto& r : results) out.push_back(std::move(*r));
    return out;
}

}  // namespace cht::infer
