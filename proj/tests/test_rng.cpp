#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <set>

#include "rvm/rng.hpp"

using namespace rvm::rng;

TEST_CASE("philox4x32-10 known-answer vectors") {
    CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("philox is usable at compile time") {
    constexpr Counter c = philox4x32_10({0, 0, 0, 0}, {0, 0});
    static_assert(c[0] == 0x6627e8d5u);
}

TEST_CASE("key from seed splits the 64-bit seed") {
    CHECK(key_from_seed(0x0123456789abcdefull) == Key{0x89abcdef, 0x01234567});
}

TEST_CASE("unit conversion stays strictly inside (0, 1)") {
    CHECK(to_unit_open32(0) > 0.0);
    CHECK(to_unit_open32(0xffffffffu) < 1.0);
}

TEST_CASE("normal3 is a pure function of its address") {
    const auto a = normal3(42, Stream::SolverNoise, 1, 2, 3);
    const auto b = normal3(42, Stream::SolverNoise, 1, 2, 3);
    CHECK(a == b);
    CHECK(normal3(42, Stream::SolverNoise, 1, 2, 4) != a);
    CHECK(normal3(43, Stream::SolverNoise, 1, 2, 3) != a);
    CHECK(normal3(42, Stream::FeynmanKac, 1, 2, 3) != a);
}

TEST_CASE("normal3 moments") {
    const int n = 200000;
    double s[3] = {0, 0, 0}, s2[3] = {0, 0, 0}, cross = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto z = normal3(9, Stream::SolverNoise, static_cast<std::uint32_t>(i), 0, 0);
        for (int a = 0; a < 3; ++a) {
            s[a] += z[a];
            s2[a] += z[a] * z[a];
        }
        cross += z[0] * z[2];
    }
    for (int a = 0; a < 3; ++a) {
        const double mean = s[a] / n;
        const double var = s2[a] / n - mean * mean;
        CHECK(std::abs(mean) < 5.0 / std::sqrt(n));
        CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / n));
    }
    CHECK(std::abs(cross / n) < 5.0 / std::sqrt(n));
}
