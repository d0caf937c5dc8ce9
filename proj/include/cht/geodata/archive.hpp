#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cht/bytes.hpp"
#include "cht/geodata/bands.hpp"
#include "cht/geodata/raster.hpp"

namespace cht::geodata {

struct Label {
    int row = 0;
    int col = 0;
    float height = 0.0f;
    int track_id = 0;

    bool operator==(const Label&) const = default;
};

struct SampleMetadata {
    uint64_t seed = 0;
    std::vector<float> cloud_fractions;  // one per month entry

    bool operator==(const SampleMetadata&) const = default;
};

// One training sample: monthly optical stack, yearly radar composite, sparse labels.
struct SampleArchive {
    std::string patch_id;
    int year = 0;
    std::vector<int> months;              // calendar month of each s2_stack entry
    std::vector<RasterPatch> s2_stack;    // one raster per month, same grid
    RasterPatch s1_composite;
    std::vector<Label> labels;
    SampleMetadata metadata;

    int height() const { return s1_composite.height(); }
    int width() const { return s1_composite.width(); }

    bool operator==(const SampleArchive&) const = default;
};

// Throws SchemaError unless the sample has months 1..12 in order, a shared grid across all
// rasters, and every label in-bounds with height in [0, 100].
void validate_archive(const SampleArchive& sample);
// Same checks without the full-year requirement (used for month subsets).
void validate_sample(const SampleArchive& sample);

Bytes archive_encode(const SampleArchive& sample);
SampleArchive archive_decode(std::span<const unsigned char> container, const std::string& context);

void archive_write(const SampleArchive& sample, const std::filesystem::path& path);
SampleArchive archive_read(const std::filesystem::path& path);

// Entry names inside the container.
std::string month_entry_name(int month);
inline constexpr const char* kManifestEntry = "manifest.json";
inline constexpr const char* kS1Entry = "s1.bin";
inline constexpr const char* kArchiveFormat = "cht-sample/1";

}  // namespace cht::geodata
