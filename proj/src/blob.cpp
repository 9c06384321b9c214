#include "bicnet/blob.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "bicnet/errors.hpp"

namespace bicnet {

namespace wire {

static_assert(sizeof(float) == 4 && sizeof(double) == 8, "IEEE-754 layout assumed");

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

void put_bytes(std::string& out, const std::string& s) {
    put_u32(out, std::uint32_t(s.size()));
    out.append(s);
}

void Reader::need(std::size_t n) {
    if (pos + n > buf.size())
        throw FormatError(context + ": truncated at byte " + std::to_string(pos));
}

std::uint32_t Reader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

std::uint64_t Reader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
}

float Reader::f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

double Reader::f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::string Reader::bytes() {
    std::uint32_t n = u32();
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
}

void Reader::expect_magic(const char magic[4]) {
    need(4);
    if (std::memcmp(buf.data() + pos, magic, 4) != 0)
        throw FormatError(context + ": bad magic bytes");
    pos += 4;
}

void Reader::expect_end() {
    if (pos != buf.size())
        throw FormatError(context + ": " + std::to_string(buf.size() - pos) +
                          " trailing bytes after payload");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on " + path);
    return bytes;
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw IoError("write failure on " + path);
}

} // namespace wire

void write_blob(const std::string& path, const Blob& b) {
    if (b.numel() != b.data.size())
        throw DimensionError("blob payload does not match its extents");
    std::string out;
    out.reserve(16 + 4 * b.extents.size() + 4 * b.data.size());
    out.append(kBlobMagic, 4);
    wire::put_u32(out, kBlobVersion);
    wire::put_u32(out, std::uint32_t(b.extents.size()));
    for (auto e : b.extents) wire::put_u32(out, e);
    for (float v : b.data) wire::put_f32(out, v);
    wire::write_file(path, out);
}

Blob read_blob(const std::string& path) {
    const std::string bytes = wire::read_file(path);
    wire::Reader r{bytes, 0, path};
    r.expect_magic(kBlobMagic);
    const std::uint32_t version = r.u32();
    if (version != kBlobVersion)
        throw FormatError(path + ": unsupported feature blob version " + std::to_string(version));
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) throw FormatError(path + ": implausible rank " + std::to_string(rank));
    Blob b;
    b.extents.resize(rank);
    for (auto& e : b.extents) {
        e = r.u32();
        if (e == 0) throw FormatError(path + ": zero extent");
    }
    b.data.resize(b.numel());
    for (auto& v : b.data) v = r.f32();
    r.expect_end();
    return b;
}

} // namespace bicnet
