#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mckv/measure.hpp"

namespace mckv {

struct W2Method {
    enum class Kind { kExact1d, kExactAssignment, kSliced, kAuto };

    Kind kind = Kind::kAuto;
    int projections = 128;
    std::uint64_t seed = 0;

    static W2Method exact_1d() { return {Kind::kExact1d}; }
    static W2Method exact_assignment() { return {Kind::kExactAssignment}; }
    static W2Method sliced(int k, std::uint64_t seed) { return {Kind::kSliced, k, seed}; }
    static W2Method automatic(std::uint64_t seed = 0) { return {Kind::kAuto, 128, seed}; }
};

inline constexpr std::size_t kMaxAssignmentSize = 512;

// W2 between uniform-weight clouds.
//   exact_1d          d = 1, any sizes, quantile coupling.
//   exact_assignment  equal N <= 512, optimal permutation (Hungarian).
//   sliced            root mean of k seeded random-projection 1-d W2^2.
//   automatic         exact_1d if d = 1, assignment if equal N <= 512, else sliced(128).
double w2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, W2Method method = W2Method::automatic());

// Squared 1-d W2 between two sorted samples (sizes may differ).
double w2_squared_sorted_1d(std::span<const double> a, std::span<const double> b);

// Minimum-cost perfect matching on an n x n row-major cost matrix. Returns the
// column assigned to each row.
std::vector<int> solve_assignment(std::span<const double> cost, std::size_t n);

// sup over grid nodes of exp(-lambda t) W2(f1_t, f2_t).
double w2_lambda(const MeasureFlow& f1, const MeasureFlow& f2, double lambda,
                 W2Method method = W2Method::automatic());

}  // namespace mckv
