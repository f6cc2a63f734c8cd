#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace rvm::rng {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
/// A pure function of (counter, key); there is no generator state to share between threads.
constexpr Counter philox4x32_10(Counter ctr, Key key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

constexpr Key key_from_seed(std::uint64_t seed) {
    return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

/// Uniform on (0, 1) from 32 bits: (u + 0.5) / 2^32.
constexpr double to_unit_open32(std::uint32_t u) { return (static_cast<double>(u) + 0.5) * 0x1.0p-32; }

/// Two independent standard normals (Box-Muller) from two 32-bit words.
inline std::array<double, 2> box_muller(std::uint32_t a, std::uint32_t b) {
    const double radius = std::sqrt(-2.0 * std::log(to_unit_open32(a)));
    const double angle = 2.0 * std::numbers::pi * to_unit_open32(b);
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

/// Stream tags keep the solver noise and the various Monte Carlo checks in disjoint
/// regions of counter space, even under the same seed.
enum class Stream : std::uint32_t {
    SolverNoise = 1,
    FeynmanKac = 2,
    DualityForward = 3,
    DualityBackward = 4,
};

/// Three standard normals addressed by (a, b, c) within a tagged stream: one Philox block,
/// words 0-1 give a Box-Muller pair and words 2-3 the third value.
inline std::array<double, 3> normal3(std::uint64_t seed, Stream stream, std::uint32_t a,
                                     std::uint32_t b, std::uint32_t c) {
    const std::uint32_t tag = static_cast<std::uint32_t>(stream) << 8;
    const Counter w = philox4x32_10({a, b, c, tag}, key_from_seed(seed));
    const auto p = box_muller(w[0], w[1]);
    const double radius = std::sqrt(-2.0 * std::log(to_unit_open32(w[2])));
    return {p[0], p[1], radius * std::cos(2.0 * std::numbers::pi * to_unit_open32(w[3]))};
}

}  // namespace rvm::rng
