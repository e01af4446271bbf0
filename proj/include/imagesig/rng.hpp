#ifndef IMAGESIG_RNG_HPP
#define IMAGESIG_RNG_HPP

#include <cstdint>
#include <cmath>
#include <string_view>

namespace imagesig {

// 64-bit FNV-1a. Used for RNG sub-stream derivation and cache keys.
inline uint64_t fnv1a64(std::string_view bytes, uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Deterministic counter-based generator (SplitMix64). All randomness in the
// pipeline flows from one seed through named sub-streams so that split,
// init, shuffle and augment draws are independently reproducible.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    // Sub-stream derived from a parent seed and a label, e.g. Rng(seed, "shuffle").
    Rng(uint64_t seed, std::string_view stream) : state_(fnv1a64(stream) ^ (seed * 0x9e3779b97f4a7c15ull)) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    template <typename T>
    void shuffle(T* data, size_t n) {
        for (size_t i = n; i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(data[i - 1], data[j]);
        }
    }

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace imagesig

#endif  // IMAGESIG_RNG_HPP
