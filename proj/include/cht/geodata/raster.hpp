#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cht::geodata {

inline constexpr float kNoData = -9999.0f;

// Top-left corner of the top-left pixel, in metres. Row 0 is the northernmost row.
struct Origin {
    double easting = 0.0;
    double northing = 0.0;

    bool operator==(const Origin&) const = default;
};

struct PixelIndex {
    long row = 0;
    long col = 0;
};

// Georeferenced multi-band grid, stored band-major: data[(b * height + r) * width + c].
// Immutable once built; share freely across threads.
class RasterPatch {
public:
    RasterPatch() = default;
    RasterPatch(Origin origin, double resolution, std::vector<std::string> bands, int height,
                int width, std::vector<float> data, float nodata = kNoData);

    // Constant-filled raster with the given geometry.
    static RasterPatch filled(Origin origin, double resolution, std::vector<std::string> bands,
                              int height, int width, float value, float nodata = kNoData);

    const Origin& origin() const { return origin_; }
    double resolution() const { return resolution_; }
    const std::vector<std::string>& bands() const { return bands_; }
    int band_count() const { return static_cast<int>(bands_.size()); }
    int height() const { return height_; }
    int width() const { return width_; }
    float nodata() const { return nodata_; }
    std::span<const float> data() const { return data_; }
    std::span<const float> band(int b) const;

    float at(int b, int row, int col) const {
        return data_[(static_cast<size_t>(b) * height_ + row) * width_ + col];
    }

    // Index of a band by name; throws SchemaError when absent.
    int band_index(const std::string& name) const;
    bool has_band(const std::string& name) const;

    // Origin, resolution, and pixel size agree (band lists may differ).
    bool same_grid(const RasterPatch& other) const;
    // same_grid plus identical band list.
    bool same_geometry(const RasterPatch& other) const;

    // Pixel containing a map coordinate. May be outside the raster.
    PixelIndex pixel_of(double easting, double northing) const;
    // Map coordinate of a pixel centre.
    std::pair<double, double> center_of(long row, long col) const;
    bool contains(long row, long col) const {
        return row >= 0 && col >= 0 && row < height_ && col < width_;
    }

    bool operator==(const RasterPatch& other) const;

private:
    Origin origin_;
    double resolution_ = 10.0;
    std::vector<std::string> bands_;
    int height_ = 0;
    int width_ = 0;
    std::vector<float> data_;
    float nodata_ = kNoData;
};

// Copy of rows [row0, row0 + h) and cols [col0, col0 + w). Throws RangeError when the
// window leaves the patch.
RasterPatch extract_window(const RasterPatch& patch, int row0, int col0, int h, int w);

// Pastes patches on a common grid into one raster covering their union; gaps are nodata.
// All inputs must share resolution and band list.
RasterPatch mosaic(std::span<const RasterPatch> patches);

// Keeps only the named bands, in the given order.
RasterPatch select_bands(const RasterPatch& patch, const std::vector<std::string>& names);

// Raster entry payload: 5-field little-endian header (u32 bands, u32 height, u32 width,
// f64 resolution, f32 nodata) followed by the float32 samples.
std::vector<unsigned char> encode_raster_payload(const RasterPatch& patch);
// Inverse of encode_raster_payload; origin and band names come from elsewhere.
RasterPatch decode_raster_payload(std::span<const unsigned char> bytes, Origin origin,
                                  std::vector<std::string> bands, const std::string& entry);

// Standalone raster file: "CHTRAST1", u32 JSON length, JSON {origin, bands}, then the
// payload above.
void write_raster(const std::filesystem::path& path, const RasterPatch& patch);
RasterPatch read_raster(const std::filesystem::path& path);

}  // namespace cht::geodata
