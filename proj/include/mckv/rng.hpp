#pragma once

// Counter-based random numbers (Philox4x32-10). Every draw in the library is
// a pure function of (seed, stream tag, two 32-bit indices, block counter), so
// results never depend on thread count or scheduling order.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mckv {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

constexpr void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    lo = static_cast<std::uint32_t>(p);
    hi = static_cast<std::uint32_t>(p >> 32);
}

}  // namespace detail

constexpr Philox4x32Counter philox4x32_10(Philox4x32Counter ctr, Philox4x32Key key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += detail::kPhiloxW0;
            key[1] += detail::kPhiloxW1;
        }
        std::uint32_t lo0 = 0, hi0 = 0, lo1 = 0, hi1 = 0;
        detail::mulhilo(detail::kPhiloxM0, ctr[0], lo0, hi0);
        detail::mulhilo(detail::kPhiloxM1, ctr[2], lo1, hi1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

// Purpose tags keep the substreams of different consumers disjoint.
enum class StreamTag : std::uint32_t {
    kSimNoise = 1,
    kBootstrap = 2,
    kSliced = 3,
    kSampler = 4,
    kFamily = 5,
    kInitial = 6,
    kResample = 7,
    kMapCheck = 8,
    kAssumption = 9,
};

// Sequential view of one substream. Cheap to construct; make one per
// (particle, step), (replicate), (sample), ... and draw from it.
class PhiloxStream {
public:
    PhiloxStream(std::uint64_t seed, StreamTag tag, std::uint32_t a, std::uint32_t b = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          ctr_{0u, a, b, static_cast<std::uint32_t>(tag)} {}

    std::uint32_t next_u32() {
        if (used_ == 4) refill();
        return block_[used_++];
    }

    // Uniform on the open interval (0, 1) with 53 bits of resolution.
    double uniform() {
        const std::uint64_t hi = next_u32() >> 5;
        const std::uint64_t lo = next_u32() >> 6;
        return (static_cast<double>((hi << 26) | lo) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n > 0. Lemire's multiply-shift; bias < n / 2^32.
    std::uint32_t below(std::uint32_t n) {
        return static_cast<std::uint32_t>((static_cast<std::uint64_t>(next_u32()) * n) >> 32);
    }

    // Standard normal via Box-Muller; the second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    void refill() {
        block_ = philox4x32_10(ctr_, key_);
        ++ctr_[0];
        used_ = 0;
    }

    Philox4x32Key key_;
    Philox4x32Counter ctr_;
    Philox4x32Counter block_{};
    int used_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mckv
