/**
 * Seeded random streams.
 *
 * One master seed expands into named, indexed substreams so that components
 * (data, init, diffusion, sampling) and parallel workers draw independently
 * and reproducibly regardless of scheduling.
 */

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cdrdiff {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Independent stream `index` of substream `name` under `master`.
inline Rng make_stream(std::uint64_t master, std::string_view name, std::uint64_t index = 0) {
    const std::uint64_t a = splitmix64(master ^ fnv1a(name));
    const std::uint64_t b = splitmix64(a + index);
    std::seed_seq seq{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32)};
    return Rng(seq);
}

inline double standard_normal(Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

inline double uniform01(Rng& rng) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

}  // namespace cdrdiff
