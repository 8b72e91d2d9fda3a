#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace clares::hsz {

// HSZ container: little-endian, magic "HSZ1", u8 dtype (1 = float32,
// 2 = int32), u8 ndim, ndim x u32 dims, then the row-major payload.

constexpr std::uint8_t kDtypeF32 = 1;
constexpr std::uint8_t kDtypeI32 = 2;

struct Raw {
    std::uint8_t dtype = 0;
    std::vector<std::uint32_t> dims;
    std::vector<float> f32;
    std::vector<std::int32_t> i32;

    std::size_t count() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

Raw read(const std::string& path);
void write_f32(const std::string& path, const std::vector<std::uint32_t>& dims,
               const float* data);
void write_i32(const std::string& path, const std::vector<std::uint32_t>& dims,
               const std::int32_t* data);

}  // namespace clares::hsz
