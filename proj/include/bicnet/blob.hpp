#pragma once

// Single-tensor feature container: magic "BICF", then format version, rank
// and the extents as unsigned 32-bit little-endian words, then the payload
// as row-major IEEE-754 32-bit values, also little-endian.

#include <cstdint>
#include <string>
#include <vector>

namespace bicnet {

inline constexpr char kBlobMagic[4] = {'B', 'I', 'C', 'F'};
inline constexpr std::uint32_t kBlobVersion = 1;

struct Blob {
    std::vector<std::uint32_t> extents;
    std::vector<float> data;

    std::size_t numel() const {
        std::size_t n = 1;
        for (auto e : extents) n *= e;
        return n;
    }
};

void write_blob(const std::string& path, const Blob& b);
Blob read_blob(const std::string& path);

// Byte-level encode/decode shared with the checkpoint container.
namespace wire {
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f32(std::string& out, float v);
void put_f64(std::string& out, double v);
void put_bytes(std::string& out, const std::string& s);

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    std::string context;

    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    double f64();
    std::string bytes();
    void expect_magic(const char magic[4]);
    void expect_end();
    void need(std::size_t n);
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);
} // namespace wire

} // namespace bicnet
