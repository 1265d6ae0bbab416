#pragma once

#include <cstdint>
#include <string_view>

namespace lmv {

// SplitMix64 (Vigna, public domain). Used everywhere deterministic noise is
// needed: the output sequence is fully specified, unlike the standard
// library distributions, so seeded runs reproduce bit-for-bit across
// platforms and compilers.
struct SplitMix64 {
    std::uint64_t state = 0;

    explicit SplitMix64(std::uint64_t seed = 0) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_u01() {
        return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
    }

    // Uniform in [0, n). Modulo bias is below n / 2^64, irrelevant here.
    std::uint64_t next_below(std::uint64_t n) { return n ? next() % n : 0; }
};

// FNV-1a over a sequence of byte strings, with a 0x00 separator between
// parts so ("ab","c") and ("a","bc") hash differently.
inline std::uint64_t fnv1a64(std::initializer_list<std::string_view> parts) {
    std::uint64_t h = 1469598103934665603ULL;
    bool first = true;
    for (std::string_view p : parts) {
        if (!first) {
            h ^= 0u;
            h *= 1099511628211ULL;
        }
        first = false;
        for (unsigned char c : p) {
            h ^= c;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

}  // namespace lmv
