#include "cht/preprocess/model_input.hpp"

#include <algorithm>
#include <cstring>

#include "cht/error.hpp"
#include "cht/preprocess/imagery.hpp"

namespace cht::preprocess {

using geodata::RasterPatch;
using geodata::SampleArchive;

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::composite2d: return "2D-Composite";
        case Variant::stack2d: return "2D-Stack";
        case Variant::stack3d: return "3D-Stack";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    for (Variant v : all_variants()) {
        if (variant_name(v) == name) return v;
    }
    throw ConfigError("variant", "unknown variant '" + name +
                                     "' (expected 2D-Composite, 2D-Stack or 3D-Stack)");
}

const std::vector<Variant>& all_variants() {
    static const std::vector<Variant> v{Variant::composite2d, Variant::stack2d, Variant::stack3d};
    return v;
}

int input_channels(Variant v, int months, int s2_bands) {
    const int s1 = 4;
    return v == Variant::stack2d ? months * s2_bands + s1 : s2_bands + s1;
}

static void check_geometry(const SampleArchive& sample) {
    if (sample.s2_stack.empty()) throw ShapeError("sample " + sample.patch_id + " has no months");
    const auto& ref = sample.s1_composite;
    for (size_t m = 0; m < sample.s2_stack.size(); ++m) {
        const auto& r = sample.s2_stack[m];
        if (!r.same_grid(ref) || r.bands() != sample.s2_stack.front().bands()) {
            throw ShapeError("sample " + sample.patch_id + ": month entry " + std::to_string(m) +
                             " does not match the radar composite grid");
        }
    }
}

nn::Tensor build_model_input(const SampleArchive& sample, Variant v) {
    check_geometry(sample);
    const int64_t h = sample.height();
    const int64_t w = sample.width();
    const int64_t plane = h * w;
    const int64_t months = static_cast<int64_t>(sample.s2_stack.size());
    const int64_t nb = sample.s2_stack.front().band_count();
    const int64_t ns1 = sample.s1_composite.band_count();
    const auto s1 = sample.s1_composite.data();

    if (v == Variant::stack3d) {
        const int64_t c = nb + ns1;
        std::vector<float> data(static_cast<size_t>(c * months * plane));
        for (int64_t t = 0; t < months; ++t) {
            const auto s2 = sample.s2_stack[t].data();
            for (int64_t b = 0; b < c; ++b) {
                const float* src = b < nb ? s2.data() + b * plane : s1.data() + (b - nb) * plane;
                std::memcpy(data.data() + (b * months + t) * plane, src, plane * sizeof(float));
            }
        }
        return nn::Tensor::from({c, months, h, w}, std::move(data));
    }

    std::vector<float> data;
    int64_t c = 0;
    if (v == Variant::stack2d) {
        c = months * nb + ns1;
        data.reserve(static_cast<size_t>(c * plane));
        for (const auto& month : sample.s2_stack) {
            data.insert(data.end(), month.data().begin(), month.data().end());
        }
    } else {
        c = nb + ns1;
        const auto composite = median_composite(sample.s2_stack);
        data.assign(composite.data().begin(), composite.data().end());
    }
    data.insert(data.end(), s1.begin(), s1.end());
    return nn::Tensor::from({c, h, w}, std::move(data));
}

nn::Tensor stack_batch(const std::vector<nn::Tensor>& items) {
    if (items.empty()) throw ShapeError("stack_batch: no items");
    const auto& shape = items.front().shape();
    std::vector<float> data;
    data.reserve(items.size() * items.front().numel());
    for (const auto& t : items) {
        if (t.shape() != shape) {
            throw ShapeError("stack_batch: shape " + nn::shape_str(t.shape()) + " differs from " +
                             nn::shape_str(shape));
        }
        data.insert(data.end(), t.data().begin(), t.data().end());
    }
    nn::Shape out{static_cast<int64_t>(items.size())};
    out.insert(out.end(), shape.begin(), shape.end());
    return nn::Tensor::from(out, std::move(data));
}

SampleArchive month_subset(const SampleArchive& sample, const std::vector<int>& months) {
    if (months.empty()) throw DomainError("month_subset: empty month selection");
    SampleArchive out = sample;
    out.months.clear();
    out.s2_stack.clear();
    out.metadata.cloud_fractions.clear();
    for (int m : months) {
        auto it = std::find(sample.months.begin(), sample.months.end(), m);
        if (m < 1 || m > 12 || it == sample.months.end()) {
            throw DomainError("month_subset: month " + std::to_string(m) + " not in sample " +
                              sample.patch_id);
        }
        const auto i = static_cast<size_t>(it - sample.months.begin());
        out.months.push_back(m);
        out.s2_stack.push_back(sample.s2_stack[i]);
        if (i < sample.metadata.cloud_fractions.size()) {
            out.metadata.cloud_fractions.push_back(sample.metadata.cloud_fractions[i]);
        }
    }
    return out;
}

SampleArchive band_subset(const SampleArchive& sample, const std::vector<std::string>& drop) {
    SampleArchive out = sample;
    if (sample.s2_stack.empty()) return out;
    std::vector<std::string> keep;
    for (const auto& b : sample.s2_stack.front().bands()) {
        if (std::find(drop.begin(), drop.end(), b) == drop.end()) keep.push_back(b);
    }
    if (keep.empty()) throw DomainError("band_subset: every optical band would be dropped");
    for (auto& month : out.s2_stack) month = geodata::select_bands(month, keep);
    return out;
}

std::vector<int> temporal_schedule_for(int time_steps, int levels) {
    if (time_steps < 1 || levels < 1) throw ConfigError("temporal_schedule", "invalid time length");
    std::vector<int> factors;
    int n = time_steps;
    for (int p = 2; p <= n; ++p) {
        while (n % p == 0) {
            factors.push_back(p);
            n /= p;
        }
    }
    std::vector<int> sched(levels, 1);
    std::sort(factors.rbegin(), factors.rend());
    for (int f : factors) {
        auto it = std::min_element(sched.begin(), sched.end());
        *it *= f;
    }
    std::sort(sched.begin(), sched.end(), [](int a, int b) {
        if ((a == 1) != (b == 1)) return b == 1;
        return a < b;
    });
    return sched;
}

nn::UNetSpec unet_spec_for(Variant v, int months, int s2_bands, int base_channels, int depth) {
    nn::UNetSpec spec;
    spec.variant = v == Variant::stack3d ? nn::ConvKind::conv3d : nn::ConvKind::conv2d;
    spec.in_channels = input_channels(v, months, s2_bands);
    spec.base_channels = base_channels;
    spec.depth = depth;
    spec.temporal_schedule =
        v == Variant::stack3d ? temporal_schedule_for(months, depth - 1) : std::vector<int>{};
    spec.with_final_relu = true;
    nn::validate_spec(spec);
    return spec;
}

}  // namespace cht::preprocess
