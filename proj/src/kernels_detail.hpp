#pragma once

// Per-item bodies shared by the serial and OpenMP kernels.

#include <cmath>
#include <exception>
#include <string>
#include <vector>

#include "mckv/error.hpp"
#include "mckv/kernels.hpp"
#include "mckv/rng.hpp"

namespace mckv::kernels::detail {

struct EulerScratch {
    std::vector<double> drift;
    std::vector<double> sigma;
    std::vector<double> z;

    explicit EulerScratch(int d)
        : drift(static_cast<std::size_t>(d)), sigma(static_cast<std::size_t>(d * d)), z(static_cast<std::size_t>(d)) {}
};

inline void euler_particle(const EulerArgs& a, std::size_t p, EulerScratch& s) {
    const int d = a.current->dim();
    const auto ud = static_cast<std::size_t>(d);
    auto x = a.current->particle(p);
    a.model->drift(x, s.drift);
    a.model->sigma(x, s.sigma);
    PhiloxStream rng(a.seed, StreamTag::kSimNoise, static_cast<std::uint32_t>(p), a.step);
    for (auto& v : s.z) v = rng.normal();
    const double sqdt = std::sqrt(a.dt);
    double* out = a.next.data() + p * ud;
    for (std::size_t i = 0; i < ud; ++i) {
        double noise = 0.0;
        for (std::size_t j = 0; j < ud; ++j) noise += s.sigma[i * ud + j] * s.z[j];
        out[i] = x[i] + s.drift[i] * a.dt + noise * sqdt;
        if (!std::isfinite(out[i])) {
            throw NumericalError("non-finite state at t=" + format_double(a.t) + ", particle " + std::to_string(p) +
                                 ", coordinate " + std::to_string(i + 1) + " (blow-up)");
        }
    }
}

inline void bootstrap_means_replicate(const BootstrapMeansArgs& a, int r, std::vector<double>& sums,
                                      std::span<double> out) {
    std::fill(sums.begin(), sums.end(), 0.0);
    PhiloxStream rng(a.seed, StreamTag::kBootstrap, static_cast<std::uint32_t>(r), a.stream);
    const auto n = static_cast<std::uint32_t>(a.rows);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const std::size_t row = rng.below(n);
        const double* f = a.features.data() + row * a.cols;
        for (std::size_t c = 0; c < a.cols; ++c) sums[c] += f[c];
    }
    for (std::size_t c = 0; c < a.cols; ++c) out[c] = sums[c] / static_cast<double>(a.rows);
}

inline void bootstrap_cov_replicate(const BootstrapCovArgs& a, int r, std::vector<std::uint32_t>& counts,
                                    std::vector<double>& sum_u, std::span<double> out) {
    std::fill(counts.begin(), counts.end(), 0u);
    std::fill(sum_u.begin(), sum_u.end(), 0.0);
    PhiloxStream rng(a.seed, StreamTag::kBootstrap, static_cast<std::uint32_t>(r), 0xC0u);
    const auto n = static_cast<std::uint32_t>(a.rows);
    for (std::size_t k = 0; k < a.rows; ++k) ++counts[rng.below(n)];
    const double inv_n = 1.0 / static_cast<double>(a.rows);
    for (std::size_t row = 0; row < a.rows; ++row) {
        if (counts[row] == 0) continue;
        const double w = counts[row];
        const double* u = a.centered.data() + row * a.cols;
        for (std::size_t c = 0; c < a.cols; ++c) sum_u[c] += w * u[c];
    }
    for (std::size_t q = 0; q < a.pairs.size(); ++q) {
        const auto [i, j] = a.pairs[q];
        double s = 0.0;
        for (std::size_t row = 0; row < a.rows; ++row) {
            if (counts[row] == 0) continue;
            const double* u = a.centered.data() + row * a.cols;
            s += counts[row] * u[i] * u[j];
        }
        out[q] = s * inv_n - (sum_u[static_cast<std::size_t>(i)] * inv_n) * (sum_u[static_cast<std::size_t>(j)] * inv_n);
    }
}

// Keeps the exception of the smallest failing index so that error reporting
// does not depend on scheduling.
class FirstError {
public:
    void record(std::size_t index, std::exception_ptr e) {
        if (!error_ || index < index_) {
            index_ = index;
            error_ = std::move(e);
        }
    }
    void merge(const FirstError& other) {
        if (other.error_) record(other.index_, other.error_);
    }
    void rethrow() const {
        if (error_) std::rethrow_exception(error_);
    }

private:
    std::size_t index_ = 0;
    std::exception_ptr error_;
};

}  // namespace mckv::kernels::detail
