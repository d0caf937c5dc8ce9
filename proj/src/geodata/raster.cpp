#include "cht/geodata/raster.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"

#include "cht/bytes.hpp"
#include "cht/error.hpp"

namespace cht::geodata {

namespace {

constexpr char kRasterMagic[] = "CHTRAST1";

}  // namespace

RasterPatch::RasterPatch(Origin origin, double resolution, std::vector<std::string> bands,
                         int height, int width, std::vector<float> data, float nodata)
    : origin_(origin),
      resolution_(resolution),
      bands_(std::move(bands)),
      height_(height),
      width_(width),
      data_(std::move(data)),
      nodata_(nodata) {
    if (!(resolution_ > 0.0)) throw DomainError("raster resolution must be positive");
    if (height_ < 0 || width_ < 0) throw ShapeError("negative raster size");
    const size_t expected = bands_.size() * static_cast<size_t>(height_) * width_;
    if (data_.size() != expected) {
        throw ShapeError("raster data length " + std::to_string(data_.size()) + " != bands x h x w = " +
                         std::to_string(expected));
    }
    std::set<std::string> seen(bands_.begin(), bands_.end());
    if (seen.size() != bands_.size()) throw SchemaError("duplicate band names in raster");
}

RasterPatch RasterPatch::filled(Origin origin, double resolution, std::vector<std::string> bands,
                                int height, int width, float value, float nodata) {
    std::vector<float> data(bands.size() * static_cast<size_t>(height) * width, value);
    return RasterPatch(origin, resolution, std::move(bands), height, width, std::move(data), nodata);
}

std::span<const float> RasterPatch::band(int b) const {
    const size_t plane = static_cast<size_t>(height_) * width_;
    return std::span<const float>(data_).subspan(static_cast<size_t>(b) * plane, plane);
}

int RasterPatch::band_index(const std::string& name) const {
    auto it = std::find(bands_.begin(), bands_.end(), name);
    if (it == bands_.end()) throw SchemaError("band '" + name + "' not present in raster");
    return static_cast<int>(it - bands_.begin());
}

bool RasterPatch::has_band(const std::string& name) const {
    return std::find(bands_.begin(), bands_.end(), name) != bands_.end();
}

bool RasterPatch::same_grid(const RasterPatch& other) const {
    return origin_ == other.origin_ && resolution_ == other.resolution_ &&
           height_ == other.height_ && width_ == other.width_;
}

bool RasterPatch::same_geometry(const RasterPatch& other) const {
    return same_grid(other) && bands_ == other.bands_;
}

PixelIndex RasterPatch::pixel_of(double easting, double northing) const {
    return PixelIndex{static_cast<long>(std::floor((origin_.northing - northing) / resolution_)),
                      static_cast<long>(std::floor((easting - origin_.easting) / resolution_))};
}

std::pair<double, double> RasterPatch::center_of(long row, long col) const {
    return {origin_.easting + (static_cast<double>(col) + 0.5) * resolution_,
            origin_.northing - (static_cast<double>(row) + 0.5) * resolution_};
}

bool RasterPatch::operator==(const RasterPatch& other) const {
    if (!same_geometry(other)) return false;
    if (std::bit_cast<uint32_t>(nodata_) != std::bit_cast<uint32_t>(other.nodata_)) return false;
    // Bitwise so that NaN payloads and signed zeros count as differences.
    return std::equal(data_.begin(), data_.end(), other.data_.begin(), [](float a, float b) {
        return std::bit_cast<uint32_t>(a) == std::bit_cast<uint32_t>(b);
    });
}

RasterPatch extract_window(const RasterPatch& patch, int row0, int col0, int h, int w) {
    if (row0 < 0 || col0 < 0 || h <= 0 || w <= 0 || row0 + h > patch.height() ||
        col0 + w > patch.width()) {
        throw RangeError("window (" + std::to_string(row0) + ", " + std::to_string(col0) + ", " +
                         std::to_string(h) + ", " + std::to_string(w) + ") outside " +
                         std::to_string(patch.height()) + "x" + std::to_string(patch.width()) +
                         " patch");
    }
    std::vector<float> out(static_cast<size_t>(patch.band_count()) * h * w);
    for (int b = 0; b < patch.band_count(); ++b) {
        auto src = patch.band(b);
        for (int r = 0; r < h; ++r) {
            const float* row = src.data() + static_cast<size_t>(row0 + r) * patch.width() + col0;
            std::copy(row, row + w, out.begin() + (static_cast<size_t>(b) * h + r) * w);
        }
    }
    const Origin origin{patch.origin().easting + col0 * patch.resolution(),
                        patch.origin().northing - row0 * patch.resolution()};
    return RasterPatch(origin, patch.resolution(), patch.bands(), h, w, std::move(out),
                       patch.nodata());
}

RasterPatch mosaic(std::span<const RasterPatch> patches) {
    if (patches.empty()) throw DomainError("mosaic of zero patches");
    const auto& first = patches.front();
    const double res = first.resolution();
    double west = first.origin().easting;
    double north = first.origin().northing;
    double east = west + first.width() * res;
    double south = north - first.height() * res;
    for (const auto& p : patches) {
        if (p.resolution() != res || p.bands() != first.bands()) {
            throw ShapeError("mosaic inputs must share resolution and bands");
        }
        west = std::min(west, p.origin().easting);
        north = std::max(north, p.origin().northing);
        east = std::max(east, p.origin().easting + p.width() * res);
        south = std::min(south, p.origin().northing - p.height() * res);
    }
    const int width = static_cast<int>(std::lround((east - west) / res));
    const int height = static_cast<int>(std::lround((north - south) / res));
    std::vector<float> out(static_cast<size_t>(first.band_count()) * height * width,
                           first.nodata());
    for (const auto& p : patches) {
        const double dc = (p.origin().easting - west) / res;
        const double dr = (north - p.origin().northing) / res;
        if (dc != std::round(dc) || dr != std::round(dr)) {
            throw ShapeError("mosaic inputs are not aligned to a common pixel grid");
        }
        const int c0 = static_cast<int>(dc);
        const int r0 = static_cast<int>(dr);
        for (int b = 0; b < p.band_count(); ++b) {
            auto src = p.band(b);
            for (int r = 0; r < p.height(); ++r) {
                std::copy_n(src.begin() + static_cast<size_t>(r) * p.width(), p.width(),
                            out.begin() + (static_cast<size_t>(b) * height + r0 + r) * width + c0);
            }
        }
    }
    return RasterPatch(Origin{west, north}, res, first.bands(), height, width, std::move(out),
                       first.nodata());
}

RasterPatch select_bands(const RasterPatch& patch, const std::vector<std::string>& names) {
    const size_t plane = static_cast<size_t>(patch.height()) * patch.width();
    std::vector<float> out;
    out.reserve(names.size() * plane);
    for (const auto& name : names) {
        auto src = patch.band(patch.band_index(name));
        out.insert(out.end(), src.begin(), src.end());
    }
    return RasterPatch(patch.origin(), patch.resolution(), names, patch.height(), patch.width(),
                       std::move(out), patch.nodata());
}

std::vector<unsigned char> encode_raster_payload(const RasterPatch& patch) {
    ByteWriter w;
    w.put<uint32_t>(static_cast<uint32_t>(patch.band_count()));
    w.put<uint32_t>(static_cast<uint32_t>(patch.height()));
    w.put<uint32_t>(static_cast<uint32_t>(patch.width()));
    w.put<double>(patch.resolution());
    w.put<float>(patch.nodata());
    w.put_array(patch.data());
    return w.take();
}

RasterPatch decode_raster_payload(std::span<const unsigned char> bytes, Origin origin,
                                  std::vector<std::string> bands, const std::string& entry) {
    ByteReader r(bytes, entry);
    const auto n_bands = r.get<uint32_t>();
    const auto height = r.get<uint32_t>();
    const auto width = r.get<uint32_t>();
    const auto resolution = r.get<double>();
    const auto nodata = r.get<float>();
    if (n_bands != bands.size()) {
        throw DecodeError(entry + ": header declares " + std::to_string(n_bands) +
                          " bands, manifest lists " + std::to_string(bands.size()));
    }
    const size_t count = static_cast<size_t>(n_bands) * height * width;
    if (r.remaining() != count * sizeof(float)) {
        throw DecodeError(entry + ": payload size does not match header");
    }
    auto data = r.get_array<float>(count);
    try {
        return RasterPatch(origin, resolution, std::move(bands), static_cast<int>(height),
                           static_cast<int>(width), std::move(data), nodata);
    } catch (const Error& e) {
        throw DecodeError(entry + ": " + e.what());
    }
}

void write_raster(const std::filesystem::path& path, const RasterPatch& patch) {
    nlohmann::json meta = {{"origin", {patch.origin().easting, patch.origin().northing}},
                           {"bands", patch.bands()}};
    const std::string text = meta.dump();
    ByteWriter w;
    w.put_string(std::string_view(kRasterMagic, 8));
    w.put<uint32_t>(static_cast<uint32_t>(text.size()));
    w.put_string(text);
    w.put_bytes(encode_raster_payload(patch));
    write_file(path, w.bytes());
}

RasterPatch read_raster(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    ByteReader r(bytes, path.string());
    if (r.get_string(8) != std::string_view(kRasterMagic, 8)) {
        throw DecodeError(path.string() + ": not a raster file");
    }
    const auto len = r.get<uint32_t>();
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(r.get_string(len));
    } catch (const nlohmann::json::exception& e) {
        throw DecodeError(path.string() + ": bad raster header: " + e.what());
    }
    const size_t offset = 8 + 4 + len;
    Origin origin{meta.at("origin").at(0).get<double>(), meta.at("origin").at(1).get<double>()};
    return decode_raster_payload(std::span(bytes).subspan(offset), origin,
                                 meta.at("bands").get<std::vector<std::string>>(), path.string());
}

}  // namespace cht::geodata
