#include "cht/infer/tiles.hpp"

#include <algorithm>

#include "cht/error.hpp"

namespace cht::infer {

namespace {

struct Span1D {
    int start = 0;
    int size = 0;
    int core_start = 0;
    int core_size = 0;
};

std::vector<Span1D> plan_axis(int extent, int window, int margin, int multiple, const char* axis) {
    if (extent < 1) throw DomainError(std::string("plan_tiles: empty extent along ") + axis);
    if (extent <= window) {
        if (extent % multiple != 0) {
            throw CapacityError(std::string("plan_tiles: extent ") + std::to_string(extent) + " along " + axis +
                                " is below the window and not a multiple of " + std::to_string(multiple));
        }
        return {{0, extent, 0, extent}};
    }
    const int stride = window - 2 * margin;
    std::vector<int> starts;
    for (int s = 0;; s += stride) {
        if (s + window >= extent) {
            starts.push_back(extent - window);
            break;
        }
        starts.push_back(s);
    }
    std::vector<Span1D> out;
    for (size_t i = 0; i < starts.size(); ++i) {
        const int core_start = i == 0 ? 0 : out.back().core_start + out.back().core_size;
        const int core_end = i + 1 == starts.size() ? extent : starts[i] + window - margin;
        out.push_back({starts[i], window, core_start, core_end - core_start});
    }
    return out;
}

}  // namespace

TilePlan plan_tiles(int height, int width, int window, int margin, int multiple) {
    if (window < 1 || margin < 0 || 2 * margin >= window) {
        throw DomainError("plan_tiles: need window > 2 * margin >= 0");
    }
    if (multiple < 1 || window % multiple != 0) {
        throw DomainError("plan_tiles: window must be a multiple of " + std::to_string(multiple));
    }
    TilePlan plan{height, width, window, margin, {}};
    const auto rows = plan_axis(height, window, margin, multiple, "rows");
    const auto cols = plan_axis(width, window, margin, multiple, "cols");
    int id = 0;
    for (const auto& r : rows) {
        for (const auto& c : cols) {
            plan.windows.push_back(
                {id++, r.start, c.start, r.size, c.size, r.core_start, c.core_start, r.core_size, c.core_size});
        }
    }
    return plan;
}

std::vector<float> stitch(const std::map<int, std::vector<float>>& outputs, const TilePlan& plan) {
    std::vector<int> missing;
    for (const auto& w : plan.windows) {
        const auto it = outputs.find(w.id);
        if (it == outputs.end()) {
            missing.push_back(w.id);
        } else if (it->second.size() != static_cast<size_t>(w.h) * w.w) {
            throw ShapeError("stitch: window " + std::to_string(w.id) + " output has " +
                             std::to_string(it->second.size()) + " values");
        }
    }
    if (!missing.empty()) {
        std::string ids;
        for (int id : missing) ids += (ids.empty() ? "" : ", ") + std::to_string(id);
        throw IncompleteError("stitch: missing outputs for windows " + ids);
    }
    std::vector<float> out(static_cast<size_t>(plan.height) * plan.width);
    for (const auto& w : plan.windows) {
        const auto& src = outputs.at(w.id);
        for (int r = 0; r < w.core_h; ++r) {
            const int er = w.core_row0 + r;
            const float* from = src.data() + static_cast<size_t>(er - w.row0) * w.w + (w.core_col0 - w.col0);
            std::copy(from, from + w.core_w, out.begin() + static_cast<size_t>(er) * plan.width + w.core_col0);
        }
    }
    return out;
}

}  // namespace cht::infer
