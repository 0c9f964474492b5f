#pragma once

#include <cstdint>
#include <random>

namespace wimec {

using Rng = std::mt19937_64;

// Substream identifiers. Each user gets an independent stream per purpose so
// that a policy's choices never shift the environment's random draws.
enum class Stream : std::uint64_t {
    profile = 1,
    arrivals = 2,
    fading = 3,
    observation = 4,
    policy = 5,
    energy = 6,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
    return splitmix64(h ^ (index * 0xD1B54A32D192ED03ULL));
}

inline Rng make_stream(std::uint64_t master, Stream stream, std::uint64_t index) {
    return Rng(derive_seed(master, stream, index));
}

}  // namespace wimec
