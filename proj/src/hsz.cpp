#include "clares/hsz.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "clares/error.hpp"

namespace clares::hsz {

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_header(std::ofstream& out, std::uint8_t dtype,
                  const std::vector<std::uint32_t>& dims) {
    out.write("HSZ1", 4);
    out.put(static_cast<char>(dtype));
    out.put(static_cast<char>(dims.size()));
    for (auto d : dims) put_u32(out, d);
}

}  // namespace

Raw read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "HSZ1", 4) != 0)
        throw FormatError(path + ": bad magic, not an HSZ container");
    Raw raw;
    raw.dtype = static_cast<std::uint8_t>(in.get());
    const int ndim = in.get();
    if (!in || (raw.dtype != kDtypeF32 && raw.dtype != kDtypeI32))
        throw FormatError(path + ": unsupported dtype code " + std::to_string(raw.dtype));
    if (ndim <= 0 || ndim > 8) throw FormatError(path + ": implausible ndim");
    raw.dims.resize(static_cast<std::size_t>(ndim));
    for (auto& d : raw.dims) d = get_u32(in);
    if (!in) throw FormatError(path + ": truncated header");
    const std::size_t count = raw.count();
    // both dtypes are 4 bytes; native is little-endian on every target we build
    if (raw.dtype == kDtypeF32) {
        raw.f32.resize(count);
        in.read(reinterpret_cast<char*>(raw.f32.data()),
                static_cast<std::streamsize>(count * 4));
    } else {
        raw.i32.resize(count);
        in.read(reinterpret_cast<char*>(raw.i32.data()),
                static_cast<std::streamsize>(count * 4));
    }
    if (static_cast<std::size_t>(in.gcount()) != count * 4)
        throw FormatError(path + ": payload shorter than header-declared shape");
    in.peek();
    if (!in.eof()) throw FormatError(path + ": trailing bytes after payload");
    return raw;
}

void write_f32(const std::string& path, const std::vector<std::uint32_t>& dims,
               const float* data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    write_header(out, kDtypeF32, dims);
    std::size_t count = 1;
    for (auto d : dims) count *= d;
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 4));
    if (!out) throw DataError("short write to " + path);
}

void write_i32(const std::string& path, const std::vector<std::uint32_t>& dims,
               const std::int32_t* data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    write_header(out, kDtypeI32, dims);
    std::size_t count = 1;
    for (auto d : dims) count *= d;
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 4));
    if (!out) throw DataError("short write to " + path);
}

}  // namespace clares::hsz
