#include "clares/sha1.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "clares/error.hpp"

namespace clares {

namespace {

struct Sha1 {
    std::uint32_t h[5] = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u,
                          0xC3D2E1F0u};
    std::uint64_t total = 0;
    std::array<unsigned char, 64> block{};
    std::size_t fill = 0;

    static std::uint32_t rol(std::uint32_t v, int s) {
        return (v << s) | (v >> (32 - s));
    }

    void process(const unsigned char* p) {
        std::uint32_t w[80];
        for (int i = 0; i < 16; ++i)
            w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
                   (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
        for (int i = 16; i < 80; ++i)
            w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
        std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
        for (int i = 0; i < 80; ++i) {
            std::uint32_t f, k;
            if (i < 20) {
                f = (b & c) | (~b & d);
                k = 0x5A827999u;
            } else if (i < 40) {
                f = b ^ c ^ d;
                k = 0x6ED9EBA1u;
            } else if (i < 60) {
                f = (b & c) | (b & d) | (c & d);
                k = 0x8F1BBCDCu;
            } else {
                f = b ^ c ^ d;
                k = 0xCA62C1D6u;
            }
            const std::uint32_t t = rol(a, 5) + f + e + k + w[i];
            e = d;
            d = c;
            c = rol(b, 30);
            b = a;
            a = t;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
    }

    void update(const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        total += len;
        while (len > 0) {
            const std::size_t take = std::min(len, block.size() - fill);
            std::memcpy(block.data() + fill, p, take);
            fill += take;
            p += take;
            len -= take;
            if (fill == block.size()) {
                process(block.data());
                fill = 0;
            }
        }
    }

    std::string finish() {
        const std::uint64_t bits = total * 8;
        const unsigned char one = 0x80;
        update(&one, 1);
        const unsigned char zero = 0;
        while (fill != 56) update(&zero, 1);
        unsigned char len_be[8];
        for (int i = 0; i < 8; ++i)
            len_be[i] = static_cast<unsigned char>(bits >> (56 - 8 * i));
        update(len_be, 8);
        static const char* hex = "0123456789abcdef";
        std::string out;
        out.reserve(40);
        for (std::uint32_t v : h)
            for (int i = 28; i >= 0; i -= 4) out.push_back(hex[(v >> i) & 0xF]);
        return out;
    }
};

}  // namespace

std::string sha1_hex(const void* data, std::size_t len) {
    Sha1 s;
    s.update(data, len);
    return s.finish();
}

std::string git_blob_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path + " for hashing");
    std::vector<char> contents((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    const std::string header = "blob " + std::to_string(contents.size());
    Sha1 s;
    s.update(header.data(), header.size() + 1);  // includes the NUL
    s.update(contents.data(), contents.size());
    return s.finish();
}

}  // namespace clares
