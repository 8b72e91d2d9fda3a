#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace clares {

struct Rgb {
    std::uint8_t r, g, b;
};

// Fixed 16-entry class palette (index 0 = class 1). Entry 0xFF000000-free,
// chosen for contrast between adjacent ids; unlabeled pixels render black.
const std::array<Rgb, 16>& class_palette();

// Binary PPM (P6, maxval 255).
void write_ppm(const std::string& path, std::size_t rows, std::size_t cols,
               const std::vector<Rgb>& pixels);

// Binary 16-bit PGM (P5, maxval 65535, big-endian samples).
void write_pgm16(const std::string& path, std::size_t rows, std::size_t cols,
                 const std::vector<std::uint16_t>& pixels);

}  // namespace clares
