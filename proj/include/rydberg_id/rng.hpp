#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rydberg_id {

using RngStream = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-style derivation: the same (master, a, b) always yields the same stream seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(splitmix64(master) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

// FNV-1a, used to turn class keys such as "chain-5/3" into stream counters.
inline std::uint64_t hash_key(std::string_view key) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : key) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline RngStream make_stream(std::uint64_t seed) { return RngStream(seed); }

}  // namespace rydberg_id
