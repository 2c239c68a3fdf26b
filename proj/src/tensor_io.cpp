#include "fanet/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace fanet {

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; byte swapping is not implemented");

namespace {

constexpr char kMagic[4] = {'F', 'T', 'N', 'S'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("truncated tensor file: " + path);
    return v;
}

}  // namespace

void write_ftns(const std::string& path, const Tensor& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kMagic, 4);
    put(out, kVersion);
    put(out, static_cast<std::uint16_t>(4));
    const Shape s = t.shape();
    for (int d : {s.b, s.c, s.h, s.w}) put(out, static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(t.numel())));
    if (!out) throw IoError("short write: " + path);
}

Tensor read_ftns(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("not a tensor file (bad magic): " + path);
    }
    const auto version = take<std::uint16_t>(in, path);
    if (version != kVersion) {
        throw IoError("unsupported tensor file version " + std::to_string(version) + ": " + path);
    }
    const auto rank = take<std::uint16_t>(in, path);
    if (rank < 1 || rank > 4) {
        throw IoError("unsupported tensor rank " + std::to_string(rank) + ": " + path);
    }
    // Right-align the stored dims into (B,C,H,W) so vectors load as (1,1,1,N).
    std::uint64_t dims[4] = {1, 1, 1, 1};
    for (int i = 0; i < rank; ++i) dims[4 - rank + i] = take<std::uint64_t>(in, path);
    std::int64_t count = 1;
    for (std::uint64_t d : dims) {
        if (d == 0 || d > (1u << 24)) throw IoError("implausible tensor dimension in " + path);
        count *= static_cast<std::int64_t>(d);
    }
    Tensor t(Shape{static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]),
                   static_cast<int>(dims[3])});
    in.read(reinterpret_cast<char*>(t.data().data()),
            static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(count)));
    if (!in) throw IoError("truncated tensor payload: " + path);
    return t;
}

}  // namespace fanet
