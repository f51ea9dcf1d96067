#pragma once

// Data-parallel inner loops. Each kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::omp; the two produce
// bitwise-identical output because all randomness is counter-based and every
// reduction runs in a fixed order. Unqualified kernels::* dispatch to omp.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mckv/measure.hpp"
#include "mckv/model.hpp"

namespace mckv::kernels {

// One Euler-Maruyama step for every particle of `current` against `model`
// (already bound to the beginning-of-step snapshot):
//   next_p = x_p + b(x_p) dt + sigma(x_p) sqrt(dt) Z_{p,step}
// Z is drawn from the (seed, particle, step) substream. Throws the error of the
// lowest-index failing particle.
struct EulerArgs {
    const BoundModel* model = nullptr;
    const EmpiricalMeasure* current = nullptr;
    std::span<double> next;
    double t = 0.0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    std::uint32_t step = 0;
};

// Mean of each of the K feature columns under n_boot resamples of the N rows.
// features is row-major N x K; result is row-major n_boot x K. `stream`
// separates independent samples that are resampled with the same seed.
struct BootstrapMeansArgs {
    std::span<const double> features;
    std::size_t rows = 0;
    std::size_t cols = 0;
    int n_boot = 0;
    std::uint64_t seed = 0;
    std::uint32_t stream = 0;
};

// Covariance of column pairs under n_boot resamples. `centered` is row-major
// N x m (columns already centered at their full-sample means).
struct BootstrapCovArgs {
    std::span<const double> centered;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::span<const std::pair<int, int>> pairs;
    int n_boot = 0;
    std::uint64_t seed = 0;
};

namespace serial {
void euler_step(const EulerArgs& args);
std::vector<double> bootstrap_means(const BootstrapMeansArgs& args);
std::vector<double> bootstrap_covariances(const BootstrapCovArgs& args);
}  // namespace serial

namespace omp {
void euler_step(const EulerArgs& args);
std::vector<double> bootstrap_means(const BootstrapMeansArgs& args);
std::vector<double> bootstrap_covariances(const BootstrapCovArgs& args);
}  // namespace omp

inline void euler_step(const EulerArgs& args) { omp::euler_step(args); }
inline std::vector<double> bootstrap_means(const BootstrapMeansArgs& args) { return omp::bootstrap_means(args); }
inline std::vector<double> bootstrap_covariances(const BootstrapCovArgs& args) {
    return omp::bootstrap_covariances(args);
}

// Worker count used by the omp kernels (1 when built without OpenMP).
int max_threads();
void set_threads(int n);

}  // namespace mckv::kernels
