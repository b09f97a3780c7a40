#pragma once

#include <cstdint>
#include <random>

namespace disrbm {

/// All sampling operations take an explicit engine; a fixed seed gives
/// bit-identical results on a single thread.
using Rng = std::mt19937_64;

/// Decorrelated child seed for parallel streams (chain / walker index).
/// splitmix64 of seed+index, so streams differ even for adjacent indices.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline Rng make_stream(std::uint64_t seed, std::uint64_t index) {
    return Rng(derive_stream(seed, index));
}

}  // namespace disrbm
