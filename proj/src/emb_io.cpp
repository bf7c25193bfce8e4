#include "enzkit/emb_io.hpp"

#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

namespace enzkit {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

bool get_bytes(std::istream& in, void* dst, size_t n) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    return static_cast<size_t>(in.gcount()) == n;
}

std::uint32_t get_u32(std::istream& in, std::uint64_t at, const char* what) {
    unsigned char b[4];
    if (!get_bytes(in, b, 4)) throw FormatError(std::string("EMB1: truncated ") + what, at);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in, std::uint64_t at, const char* what) {
    unsigned char b[8];
    if (!get_bytes(in, b, 8)) throw FormatError(std::string("EMB1: truncated ") + what, at);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void write_emb1(std::ostream& out, const Tensor& t) {
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, static_cast<std::uint64_t>(t.rows));
    put_u64(out, static_cast<std::uint64_t>(t.cols));
    for (double v : t.data) put_f32(out, static_cast<float>(v));
}

void write_emb1_file(const std::string& path, const Tensor& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    write_emb1(out, t);
    if (!out) throw DataError("write failed: " + path);
}

TensorPtr read_emb1(std::istream& in, std::uint64_t base) {
    char magic[4];
    if (!get_bytes(in, magic, 4)) throw FormatError("EMB1: truncated magic", base);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("EMB1: bad magic \"" + std::string(magic, 4) + "\"", base);
    }
    const std::uint32_t version = get_u32(in, base + 4, "version");
    if (version != kVersion) {
        throw FormatError("EMB1: unsupported version " + std::to_string(version), base + 4);
    }
    const std::uint64_t rows = get_u64(in, base + 8, "row extent");
    const std::uint64_t cols = get_u64(in, base + 16, "col extent");
    constexpr std::uint64_t kMaxExtent = 1u << 24;  // desk-scale guard
    if (rows > kMaxExtent || cols > kMaxExtent ||
        (rows != 0 && cols > kMaxExtent * kMaxExtent / rows)) {
        throw FormatError("EMB1: extent overflow " + std::to_string(rows) + "x" +
                          std::to_string(cols), base + 8);
    }
    const std::uint64_t count = rows * cols;
    std::vector<double> values(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t at = base + 24 + i * 4;
        const std::uint32_t bits = get_u32(in, at, "payload");
        float f;
        std::memcpy(&f, &bits, 4);
        values[i] = static_cast<double>(f);
    }
    return make_tensor(static_cast<int>(rows), static_cast<int>(cols), std::move(values));
}

TensorPtr read_emb1_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    return read_emb1(in);
}

}  // namespace enzkit
