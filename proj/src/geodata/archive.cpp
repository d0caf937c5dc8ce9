#include "cht/geodata/archive.hpp"

#include <cstdio>

#include "json.hpp"

#include "cht/error.hpp"
#include "cht/geodata/zip.hpp"

namespace cht::geodata {

using nlohmann::json;

std::string month_entry_name(int month) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s2/%02d.bin", month);
    return buf;
}

void validate_sample(const SampleArchive& sample) {
    if (sample.months.empty()) throw SchemaError("sample has no monthly entries");
    if (sample.months.size() != sample.s2_stack.size()) {
        throw SchemaError("month list and optical stack differ in length");
    }
    if (!sample.metadata.cloud_fractions.empty() &&
        sample.metadata.cloud_fractions.size() != sample.months.size()) {
        throw SchemaError("cloud_fractions must have one entry per month");
    }
    const auto& ref = sample.s1_composite;
    for (size_t i = 0; i < sample.s2_stack.size(); ++i) {
        const auto& m = sample.s2_stack[i];
        if (!m.same_grid(ref)) {
            throw SchemaError("month " + std::to_string(sample.months[i]) +
                              " raster grid differs from radar composite");
        }
        if (m.bands() != sample.s2_stack.front().bands()) {
            throw SchemaError("month " + std::to_string(sample.months[i]) + " band list differs");
        }
    }
    for (const auto& l : sample.labels) {
        if (l.row < 0 || l.col < 0 || l.row >= ref.height() || l.col >= ref.width()) {
            throw SchemaError("label at (" + std::to_string(l.row) + ", " + std::to_string(l.col) +
                              ") outside patch");
        }
        if (!(l.height >= 0.0f && l.height <= 100.0f)) {
            throw SchemaError("label height " + std::to_string(l.height) + " outside [0, 100]");
        }
    }
}

void validate_archive(const SampleArchive& sample) {
    if (sample.months.size() != kMonths) {
        throw SchemaError("archive needs 12 monthly entries, got " +
                          std::to_string(sample.months.size()));
    }
    for (int m = 1; m <= kMonths; ++m) {
        if (sample.months[m - 1] != m) throw SchemaError("months must be 1..12 in order");
    }
    validate_sample(sample);
}

Bytes archive_encode(const SampleArchive& sample) {
    validate_archive(sample);
    const auto& ref = sample.s1_composite;
    json labels = json::array();
    for (const auto& l : sample.labels) labels.push_back({l.row, l.col, l.height, l.track_id});
    json manifest = {
        {"format", kArchiveFormat},
        {"patch_id", sample.patch_id},
        {"year", sample.year},
        {"origin", {ref.origin().easting, ref.origin().northing}},
        {"resolution", ref.resolution()},
        {"height", ref.height()},
        {"width", ref.width()},
        {"months", sample.months},
        {"s2_bands", sample.s2_stack.front().bands()},
        {"s1_bands", ref.bands()},
        {"labels", labels},
        {"metadata",
         {{"seed", sample.metadata.seed}, {"cloud_fractions", sample.metadata.cloud_fractions}}},
    };
    ZipWriter zip;
    zip.add(kManifestEntry, manifest.dump(1));
    for (size_t i = 0; i < sample.s2_stack.size(); ++i) {
        zip.add(month_entry_name(sample.months[i]), encode_raster_payload(sample.s2_stack[i]));
    }
    zip.add(kS1Entry, encode_raster_payload(ref));
    return zip.finish();
}

SampleArchive archive_decode(std::span<const unsigned char> container, const std::string& context) {
    auto entries = zip_read_all(container, context);
    auto find = [&](const std::string& name) -> const Bytes& {
        auto it = entries.find(name);
        if (it == entries.end()) throw SchemaError(context + ": missing entry '" + name + "'");
        return it->second;
    };

    json manifest;
    try {
        const Bytes& raw = find(kManifestEntry);
        manifest = json::parse(raw.begin(), raw.end());
    } catch (const json::exception& e) {
        throw DecodeError(context + ": entry '" + kManifestEntry + "': " + e.what());
    }

    SampleArchive s;
    try {
        if (manifest.at("format") != kArchiveFormat) {
            throw SchemaError(context + ": unknown archive format");
        }
        s.patch_id = manifest.at("patch_id").get<std::string>();
        s.year = manifest.at("year").get<int>();
        s.months = manifest.at("months").get<std::vector<int>>();
        const Origin origin{manifest.at("origin").at(0).get<double>(),
                            manifest.at("origin").at(1).get<double>()};
        const auto s2_bands = manifest.at("s2_bands").get<std::vector<std::string>>();
        const auto s1_bands = manifest.at("s1_bands").get<std::vector<std::string>>();
        for (const auto& l : manifest.at("labels")) {
            s.labels.push_back(Label{l.at(0).get<int>(), l.at(1).get<int>(), l.at(2).get<float>(),
                                     l.at(3).get<int>()});
        }
        s.metadata.seed = manifest.at("metadata").at("seed").get<uint64_t>();
        s.metadata.cloud_fractions =
            manifest.at("metadata").at("cloud_fractions").get<std::vector<float>>();

        if (s.months.size() != kMonths) {
            throw SchemaError(context + ": archive needs 12 monthly entries, manifest lists " +
                              std::to_string(s.months.size()));
        }
        for (int m : s.months) {
            const std::string name = month_entry_name(m);
            s.s2_stack.push_back(
                decode_raster_payload(find(name), origin, s2_bands, context + ": entry '" + name + "'"));
        }
        s.s1_composite = decode_raster_payload(find(kS1Entry), origin, s1_bands,
                                               context + ": entry '" + std::string(kS1Entry) + "'");
    } catch (const json::exception& e) {
        throw SchemaError(context + ": manifest: " + e.what());
    }
    validate_archive(s);
    return s;
}

void archive_write(const SampleArchive& sample, const std::filesystem::path& path) {
    write_file(path, archive_encode(sample));
}

SampleArchive archive_read(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    return archive_decode(bytes, path.string());
}

}  // namespace cht::geodata
