#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cht/error.hpp"

namespace cht {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian and written with memcpy");

using Bytes = std::vector<unsigned char>;

class ByteWriter {
public:
    template <typename T>
    void put(T value) {
        const auto* p = reinterpret_cast<const unsigned char*>(&value);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }
    void put_bytes(std::span<const unsigned char> bytes) {
        buf_.insert(buf_.end(), bytes.begin(), bytes.end());
    }
    void put_string(std::string_view s) {
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    template <typename T>
    void put_array(std::span<const T> values) {
        const auto* p = reinterpret_cast<const unsigned char*>(values.data());
        buf_.insert(buf_.end(), p, p + values.size_bytes());
    }
    Bytes& bytes() { return buf_; }
    Bytes take() { return std::move(buf_); }

private:
    Bytes buf_;
};

class ByteReader {
public:
    ByteReader(std::span<const unsigned char> bytes, std::string context)
        : bytes_(bytes), context_(std::move(context)) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }
    std::string get_string(size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    template <typename T>
    std::vector<T> get_array(size_t count) {
        need(count * sizeof(T));
        std::vector<T> out(count);
        std::memcpy(out.data(), bytes_.data() + pos_, count * sizeof(T));
        pos_ += count * sizeof(T);
        return out;
    }
    size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(size_t n) const {
        if (pos_ + n > bytes_.size()) throw DecodeError(context_ + ": truncated data");
    }

    std::span<const unsigned char> bytes_;
    size_t pos_ = 0;
    std::string context_;
};

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes);

}  // namespace cht
