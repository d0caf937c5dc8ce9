#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "cht/nn/tensor.hpp"

namespace cht::nn {

enum class ConvKind { conv2d, conv3d };

struct UNetSpec {
    ConvKind variant = ConvKind::conv3d;
    int in_channels = 16;
    int base_channels = 16;
    int depth = 4;
    // Temporal pooling factor per downsampling step (3D only); the product is the input
    // time length and the bottleneck has one time step.
    std::vector<int> temporal_schedule{2, 2, 3};
    bool with_final_relu = true;

    int time_steps() const;
    int channels_at(int level) const { return base_channels << level; }
    // Time length at each encoder level (all 1 for 2D).
    std::vector<int> time_at_levels() const;

    bool operator==(const UNetSpec&) const = default;
};

// Throws ConfigError on depth < 2, a schedule of the wrong length, or non-positive widths.
void validate_spec(const UNetSpec& spec);

nlohmann::json spec_to_json(const UNetSpec& spec);
UNetSpec spec_from_json(const nlohmann::json& j);

// Ordered named parameter set.
template <typename T>
class BasicParams {
public:
    void add(std::string name, BasicTensor<T> tensor);
    const BasicTensor<T>& get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    size_t size() const { return tensors_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    std::vector<BasicTensor<T>>& tensors() { return tensors_; }
    const std::vector<BasicTensor<T>>& tensors() const { return tensors_; }
    int64_t count() const;

    void zero_grad();
    void set_requires_grad(bool on);
    // Deep copy with fresh storage and no gradients.
    BasicParams clone() const;

private:
    std::vector<std::string> names_;
    std::vector<BasicTensor<T>> tensors_;
    std::map<std::string, size_t> index_;
};

using Params = BasicParams<float>;

template <typename To, typename From>
BasicParams<To> cast_params(const BasicParams<From>& p) {
    BasicParams<To> out;
    for (size_t i = 0; i < p.size(); ++i) out.add(p.names()[i], cast<To>(p.tensors()[i]));
    return out;
}

// Uniform(-sqrt(3 / fan_in), +sqrt(3 / fan_in)) weights, zero biases, deterministic in seed.
template <typename T>
BasicParams<T> param_init(const UNetSpec& spec, uint64_t seed);

// Shapes seen during a forward pass, for inspection in tests.
struct UNetTrace {
    std::vector<Shape> encoder;  // output of each encoder level
    std::vector<Shape> skips;    // collapsed skip tensors
    Shape bottleneck;
};

// x: [B, C, T, H, W] for conv3d, [B, C, H, W] for conv2d. Returns [B, 1, H, W].
template <typename T>
BasicTensor<T> unet_forward(const UNetSpec& spec, const BasicParams<T>& params,
                            const BasicTensor<T>& x, UNetTrace* trace = nullptr);

// Binary checkpoint: "CHTCKPT1", u32 JSON length, JSON header {spec, meta}, u32 tensor
// count, then per tensor: u32 name length, name, u32 rank, u64 dims[rank], float32 data.
struct Checkpoint {
    UNetSpec spec;
    Params params;
    nlohmann::json meta = nlohmann::json::object();
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

extern template class BasicParams<float>;
extern template class BasicParams<double>;

}  // namespace cht::nn
