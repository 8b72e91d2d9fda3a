#include "clares/imageio.hpp"

#include <fstream>

#include "clares/error.hpp"

namespace clares {

const std::array<Rgb, 16>& class_palette() {
    static const std::array<Rgb, 16> palette = {{
        {230, 25, 75},    // 1  red
        {60, 180, 75},    // 2  green
        {255, 225, 25},   // 3  yellow
        {0, 130, 200},    // 4  blue
        {245, 130, 48},   // 5  orange
        {145, 30, 180},   // 6  purple
        {70, 240, 240},   // 7  cyan
        {240, 50, 230},   // 8  magenta
        {210, 245, 60},   // 9  lime
        {250, 190, 212},  // 10 pink
        {0, 128, 128},    // 11 teal
        {220, 190, 255},  // 12 lavender
        {170, 110, 40},   // 13 brown
        {255, 250, 200},  // 14 beige
        {128, 0, 0},      // 15 maroon
        {170, 255, 195},  // 16 mint
    }};
    return palette;
}

void write_ppm(const std::string& path, std::size_t rows, std::size_t cols,
               const std::vector<Rgb>& pixels) {
    if (pixels.size() != rows * cols) throw ArgumentError("write_ppm: size mismatch");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << "P6\n" << cols << " " << rows << "\n255\n";
    for (const auto& px : pixels) {
        out.put(static_cast<char>(px.r));
        out.put(static_cast<char>(px.g));
        out.put(static_cast<char>(px.b));
    }
    if (!out) throw DataError("short write to " + path);
}

void write_pgm16(const std::string& path, std::size_t rows, std::size_t cols,
                 const std::vector<std::uint16_t>& pixels) {
    if (pixels.size() != rows * cols) throw ArgumentError("write_pgm16: size mismatch");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << "P5\n" << cols << " " << rows << "\n65535\n";
    for (auto v : pixels) {
        out.put(static_cast<char>(v >> 8));  // most significant byte first
        out.put(static_cast<char>(v & 0xFF));
    }
    if (!out) throw DataError("short write to " + path);
}

}  // namespace clares
