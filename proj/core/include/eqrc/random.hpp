#pragma once

#include <cstdint>

namespace eqrc {

// SplitMix64 finalizer (Steele, Lea & Flood; constants from Vigna's reference
// implementation). Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

// k-th output (k >= 0) of the SplitMix64 generator seeded with `seed`.
// Random access makes any index range of a stream computable independently.
constexpr std::uint64_t splitmix_at(std::uint64_t seed, std::uint64_t k) noexcept {
    return mix64(seed + (k + 1) * kGoldenGamma);
}

// Top 53 bits mapped to [0, 1).
constexpr double to_unit_interval(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Sub-seed for stream `index` of a master seed. Distinct indices give
// statistically independent SplitMix64 streams.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix64(mix64(master ^ 0x6a09e667f3bcc909ULL) + mix64(index + 1) * kGoldenGamma);
}

}  // namespace eqrc
