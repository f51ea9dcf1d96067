#include <doctest.h>

#include <cmath>

#include "mckv/rng.hpp"

using namespace mckv;

TEST_CASE("philox4x32-10 known-answer vectors") {
    static_assert(philox4x32_10({0, 0, 0, 0}, {0, 0}) ==
                  Philox4x32Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          Philox4x32Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          Philox4x32Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are pure functions of their keys") {
    PhiloxStream a(42, StreamTag::kSimNoise, 7, 3);
    PhiloxStream b(42, StreamTag::kSimNoise, 7, 3);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u32() == b.next_u32());

    PhiloxStream c(42, StreamTag::kSimNoise, 7, 4);
    PhiloxStream d(42, StreamTag::kBootstrap, 7, 3);
    PhiloxStream e(43, StreamTag::kSimNoise, 7, 3);
    PhiloxStream ref(42, StreamTag::kSimNoise, 7, 3);
    const auto r = ref.next_u32();
    CHECK(c.next_u32() != r);
    CHECK(d.next_u32() != r);
    CHECK(e.next_u32() != r);
}

TEST_CASE("uniform and normal draws have the right moments") {
    PhiloxStream rng(1, StreamTag::kSampler, 0);
    const int n = 200000;
    double su = 0, sz = 0, szz = 0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK_UNARY(u > 0.0);
        CHECK_UNARY(u < 1.0);
        su += u;
        const double z = rng.normal();
        sz += z;
        szz += z * z;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(sz / n) < 0.01);
    CHECK(szz / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("below stays in range and covers every value") {
    PhiloxStream rng(5, StreamTag::kSampler, 1);
    int counts[7] = {};
    for (int i = 0; i < 7000; ++i) {
        const auto v = rng.below(7);
        REQUIRE(v < 7u);
        ++counts[v];
    }
    for (int c : counts) CHECK(c > 800);
}
