#pragma once

#include <cstdint>
#include <random>

namespace mira {

/// splitmix64 finalizer; decorrelates derived seeds.
inline std::uint64_t split_mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derive an independent stream seed from a base seed and stream tags.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    return split_mix(split_mix(base) ^ split_mix(tag));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t sub) {
    return derive_seed(derive_seed(base, tag), sub);
}

/// Stream tags for the named RNG consumers. Values are arbitrary but fixed:
/// changing them changes every derived stream.
namespace seed_tag {
inline constexpr std::uint64_t base_weights = 0xB0;
inline constexpr std::uint64_t adapter = 0xAD;
inline constexpr std::uint64_t data = 0xDA;
inline constexpr std::uint64_t sampling = 0x5A;
inline constexpr std::uint64_t graph = 0x60;
inline constexpr std::uint64_t client_stream = 0xC1;
} // namespace seed_tag

inline std::mt19937_64 make_engine(std::uint64_t seed) { return std::mt19937_64(seed); }

} // namespace mira
