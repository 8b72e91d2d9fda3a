#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace clares {

// SplitMix64 stream (Steele, Lea & Flood; the JDK SplittableRandom mixer).
// Chosen because the full algorithm fits in a dozen lines, so splits,
// shuffles and augmentation reproduce bit-exactly from the seed alone.
//
//   state' = state + 0x9E3779B97F4A7C15
//   z = state'; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB; out = z ^ (z >> 31)
//
// Derived draws (all documented, all consumed in call order):
//   next_double(): (next_u64() >> 11) * 2^-53            in [0, 1)
//   below(n):      high 64 bits of next_u64() * n        (Lemire multiply-shift)
//   gaussian():    Box-Muller on two uniforms, spare value cached
//   split():       child stream seeded with next_u64()
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Standard normal via Box-Muller. u1 is shifted into (0, 1] to keep
    // log() finite. Each pair of uniforms yields two values; the second is
    // cached, so calls consume uniforms in a fixed, reproducible pattern.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Independent child stream; parent advances by one draw.
    Rng split() { return Rng(next_u64()); }

    // Fisher-Yates, using below() for the index draws.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace clares
