#pragma once

#include <string>
#include <vector>

#include "cht/geodata/archive.hpp"
#include "cht/nn/tensor.hpp"
#include "cht/nn/unet.hpp"

namespace cht::preprocess {

enum class Variant { composite2d, stack2d, stack3d };

std::string variant_name(Variant v);  // "2D-Composite", "2D-Stack", "3D-Stack"
Variant variant_from_name(const std::string& name);
const std::vector<Variant>& all_variants();

// Input channel count for a sample with `months` entries of `s2_bands` bands.
int input_channels(Variant v, int months, int s2_bands);

// Model input for one sample, without a batch axis.
//   2D-Composite: [S2 + S1, H, W]; S2 channels are the per-pixel median over months.
//   2D-Stack:     [months * S2 + S1, H, W]; month-major, band order within each month.
//   3D-Stack:     [S2 + S1, months, H, W]; S1 copied into every time slice.
// S2 channels come first in the sample's band order, then the S1 bands.
nn::Tensor build_model_input(const geodata::SampleArchive& sample, Variant v);

// Stacks per-sample inputs along a new leading batch axis.
nn::Tensor stack_batch(const std::vector<nn::Tensor>& items);

// Restricts the optical stack to the listed calendar months, in the listed order.
geodata::SampleArchive month_subset(const geodata::SampleArchive& sample,
                                    const std::vector<int>& months);
// Drops the named optical bands from every month.
geodata::SampleArchive band_subset(const geodata::SampleArchive& sample,
                                   const std::vector<std::string>& drop);

// Temporal pooling factors for `levels` downsampling steps whose product is `time_steps`.
std::vector<int> temporal_schedule_for(int time_steps, int levels);

nn::UNetSpec unet_spec_for(Variant v, int months, int s2_bands, int base_channels, int depth);

}  // namespace cht::preprocess
