#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cht/bytes.hpp"

namespace cht::geodata {

// Minimal PKZIP container: deflate-compressed entries, no directories, no zip64.
// Timestamps are fixed at 1980-01-01 so identical inputs give identical bytes.
class ZipWriter {
public:
    void add(const std::string& name, std::span<const unsigned char> data);
    void add(const std::string& name, const std::string& text);
    Bytes finish() const;

private:
    struct Entry {
        std::string name;
        uint32_t crc = 0;
        uint32_t raw_size = 0;
        Bytes compressed;
    };
    std::vector<Entry> entries_;
};

// Reads every entry of a container produced by ZipWriter (or any deflate/stored zip).
// Errors name the failing entry.
std::map<std::string, Bytes> zip_read_all(std::span<const unsigned char> container,
                                          const std::string& context);

Bytes deflate_bytes(std::span<const unsigned char> raw);
Bytes inflate_bytes(std::span<const unsigned char> compressed, size_t raw_size,
                    const std::string& entry);

}  // namespace cht::geodata
