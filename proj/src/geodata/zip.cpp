#include "cht/geodata/zip.hpp"

#include <zlib.h>

#include "cht/error.hpp"

namespace cht::geodata {

namespace {

constexpr uint32_t kLocalSig = 0x04034b50;
constexpr uint32_t kCentralSig = 0x02014b50;
constexpr uint32_t kEndSig = 0x06054b50;
constexpr uint16_t kVersion = 20;
constexpr uint16_t kMethodStored = 0;
constexpr uint16_t kMethodDeflate = 8;
constexpr uint16_t kDosTime = 0;
constexpr uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;  // 1980-01-01

uint32_t crc_of(std::span<const unsigned char> data) {
    uLong crc = crc32(0L, Z_NULL, 0);
    size_t done = 0;
    while (done < data.size()) {
        const auto chunk = static_cast<uInt>(std::min<size_t>(data.size() - done, 1u << 30));
        crc = crc32(crc, data.data() + done, chunk);
        done += chunk;
    }
    return static_cast<uint32_t>(crc);
}

}  // namespace

Bytes deflate_bytes(std::span<const unsigned char> raw) {
    z_stream zs{};
    if (deflateInit2(&zs, Z_BEST_SPEED, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
        throw Error("deflateInit2 failed");
    }
    Bytes out(deflateBound(&zs, static_cast<uLong>(raw.size())));
    zs.next_in = const_cast<Bytef*>(raw.data());
    zs.avail_in = static_cast<uInt>(raw.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    const auto produced = zs.total_out;
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw Error("deflate failed");
    out.resize(produced);
    return out;
}

Bytes inflate_bytes(std::span<const unsigned char> compressed, size_t raw_size,
                    const std::string& entry) {
    z_stream zs{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw DecodeError(entry + ": inflateInit2 failed");
    Bytes out(raw_size);
    zs.next_in = const_cast<Bytef*>(compressed.data());
    zs.avail_in = static_cast<uInt>(compressed.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    const auto produced = zs.total_out;
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || produced != raw_size) {
        throw DecodeError(entry + ": corrupt deflate stream");
    }
    return out;
}

void ZipWriter::add(const std::string& name, std::span<const unsigned char> data) {
    Entry e;
    e.name = name;
    e.crc = crc_of(data);
    e.raw_size = static_cast<uint32_t>(data.size());
    e.compressed = deflate_bytes(data);
    entries_.push_back(std::move(e));
}

void ZipWriter::add(const std::string& name, const std::string& text) {
    add(name, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

Bytes ZipWriter::finish() const {
    ByteWriter w;
    std::vector<uint32_t> offsets;
    for (const auto& e : entries_) {
        offsets.push_back(static_cast<uint32_t>(w.bytes().size()));
        w.put<uint32_t>(kLocalSig);
        w.put<uint16_t>(kVersion);
        w.put<uint16_t>(0);  // flags
        w.put<uint16_t>(kMethodDeflate);
        w.put<uint16_t>(kDosTime);
        w.put<uint16_t>(kDosDate);
        w.put<uint32_t>(e.crc);
        w.put<uint32_t>(static_cast<uint32_t>(e.compressed.size()));
        w.put<uint32_t>(e.raw_size);
        w.put<uint16_t>(static_cast<uint16_t>(e.name.size()));
        w.put<uint16_t>(0);  // extra length
        w.put_string(e.name);
        w.put_bytes(e.compressed);
    }
    const auto central_start = static_cast<uint32_t>(w.bytes().size());
    for (size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        w.put<uint32_t>(kCentralSig);
        w.put<uint16_t>(kVersion);  // made by
        w.put<uint16_t>(kVersion);  // needed
        w.put<uint16_t>(0);
        w.put<uint16_t>(kMethodDeflate);
        w.put<uint16_t>(kDosTime);
        w.put<uint16_t>(kDosDate);
        w.put<uint32_t>(e.crc);
        w.put<uint32_t>(static_cast<uint32_t>(e.compressed.size()));
        w.put<uint32_t>(e.raw_size);
        w.put<uint16_t>(static_cast<uint16_t>(e.name.size()));
        w.put<uint16_t>(0);  // extra
        w.put<uint16_t>(0);  // comment
        w.put<uint16_t>(0);  // disk
        w.put<uint16_t>(0);  // internal attrs
        w.put<uint32_t>(0);  // external attrs
        w.put<uint32_t>(offsets[i]);
        w.put_string(e.name);
    }
    const auto central_size = static_cast<uint32_t>(w.bytes().size()) - central_start;
    w.put<uint32_t>(kEndSig);
    w.put<uint16_t>(0);
    w.put<uint16_t>(0);
    w.put<uint16_t>(static_cast<uint16_t>(entries_.size()));
    w.put<uint16_t>(static_cast<uint16_t>(entries_.size()));
    w.put<uint32_t>(central_size);
    w.put<uint32_t>(central_start);
    w.put<uint16_t>(0);
    return w.take();
}

std::map<std::string, Bytes> zip_read_all(std::span<const unsigned char> container,
                                          const std::string& context) {
    constexpr size_t kEndSize = 22;
    if (container.size() < kEndSize) throw DecodeError(context + ": not a zip container");
    // The writer never emits an archive comment, but tolerate one from other tools.
    size_t end_pos = std::string::npos;
    for (size_t p = container.size() - kEndSize + 1; p-- > 0;) {
        uint32_t sig;
        std::memcpy(&sig, container.data() + p, 4);
        if (sig == kEndSig) {
            end_pos = p;
            break;
        }
        if (container.size() - p > kEndSize + 0xFFFF) break;
    }
    if (end_pos == std::string::npos) throw DecodeError(context + ": missing end-of-directory record");

    ByteReader end(container.subspan(end_pos), context + " (end record)");
    end.get<uint32_t>();
    end.get<uint16_t>();
    end.get<uint16_t>();
    end.get<uint16_t>();
    const auto count = end.get<uint16_t>();
    const auto central_size = end.get<uint32_t>();
    const auto central_start = end.get<uint32_t>();
    if (static_cast<size_t>(central_start) + central_size > container.size()) {
        throw DecodeError(context + ": central directory out of range");
    }

    std::map<std::string, Bytes> out;
    ByteReader cd(container.subspan(central_start, central_size), context + " (directory)");
    for (uint16_t i = 0; i < count; ++i) {
        if (cd.get<uint32_t>() != kCentralSig) throw DecodeError(context + ": bad directory entry");
        cd.get<uint16_t>();
        cd.get<uint16_t>();
        const auto flags = cd.get<uint16_t>();
        const auto method = cd.get<uint16_t>();
        cd.get<uint16_t>();
        cd.get<uint16_t>();
        const auto crc = cd.get<uint32_t>();
        const auto csize = cd.get<uint32_t>();
        const auto usize = cd.get<uint32_t>();
        const auto name_len = cd.get<uint16_t>();
        const auto extra_len = cd.get<uint16_t>();
        const auto comment_len = cd.get<uint16_t>();
        cd.get<uint16_t>();
        cd.get<uint16_t>();
        cd.get<uint32_t>();
        const auto local_offset = cd.get<uint32_t>();
        const std::string name = cd.get_string(name_len);
        cd.get_string(static_cast<size_t>(extra_len) + comment_len);
        const std::string where = context + ": entry '" + name + "'";
        if (flags & 0x1) throw DecodeError(where + " is encrypted");

        if (static_cast<size_t>(local_offset) + 30 > container.size()) {
            throw DecodeError(where + ": local header out of range");
        }
        ByteReader lh(container.subspan(local_offset), where);
        if (lh.get<uint32_t>() != kLocalSig) throw DecodeError(where + ": bad local header");
        lh.get_string(22);
        const auto lname = lh.get<uint16_t>();
        const auto lextra = lh.get<uint16_t>();
        const size_t data_start = local_offset + 30 + lname + lextra;
        if (data_start + csize > container.size()) throw DecodeError(where + ": data truncated");
        auto payload = container.subspan(data_start, csize);

        Bytes raw;
        if (method == kMethodDeflate) {
            raw = inflate_bytes(payload, usize, where);
        } else if (method == kMethodStored) {
            if (csize != usize) throw DecodeError(where + ": stored size mismatch");
            raw.assign(payload.begin(), payload.end());
        } else {
            throw DecodeError(where + ": unsupported compression method " + std::to_string(method));
        }
        if (crc_of(raw) != crc) throw DecodeError(where + ": CRC mismatch");
        out.emplace(name, std::move(raw));
    }
    return out;
}

}  // namespace cht::geodata
