#pragma once

// Seeded generators for the points and measures at which structural
// conditions are probed. Sample k is a pure function of (seed, k).

#include <cstdint>
#include <string>
#include <vector>

#include "mckv/measure.hpp"
#include "mckv/rng.hpp"

namespace mckv {

enum class MeasureFamily {
    kProductGaussian,
    kProductUniform,
    kDelta,
    // Product cloud pushed through x_i + w sum_{k != i} x_k, w >= 0: positively
    // associated exactly.
    kPositiveMixed,
    // Same with w < 0; generally not positively associated.
    kNegativeMixed,
};

std::string to_string(MeasureFamily f);
std::vector<MeasureFamily> all_families();
// Families whose clouds are positively associated by construction.
std::vector<MeasureFamily> positive_families();

struct SamplingBox {
    double t_lo = 0.0;
    double t_hi = 1.0;
    double x_lo = -3.0;
    double x_hi = 3.0;
};

// Product families are tensor grids: m values per coordinate with
// m = max(2, floor(target^(1/d))), giving m^d particles. Tensor grids are
// exact product measures, so Harris/FKG holds for the cloud itself.
int grid_points_per_coordinate(int dim, int target_particles);

EmpiricalMeasure draw_measure(MeasureFamily family, int dim, int target_particles, PhiloxStream& rng);

// mu = mu_i x mu_rest: coordinate `i` independent of the others, the rest
// drawn from a positively associated family.
EmpiricalMeasure draw_split_product_measure(int dim, int i, int target_particles, PhiloxStream& rng);

struct DomainSample {
    double t = 0.0;
    std::vector<double> x;
    EmpiricalMeasure mu;
};

struct DomainSampler {
    SamplingBox box;
    std::vector<MeasureFamily> families = all_families();
    int particles = 64;
    std::uint64_t seed = 0;

    DomainSample sample(int dim, std::uint32_t index) const;
};

enum class PairingMode { kOrdered, kOrderedFixing, kEqual, kOrderedFixingPair };

std::string to_string(PairingMode m);

struct MeasurePair {
    EmpiricalMeasure lower;  // nu
    EmpiricalMeasure upper;  // mu, with nu <= mu under the pairing mode
};

struct MeasurePairSampler {
    std::vector<MeasureFamily> families = all_families();
    PairingMode mode = PairingMode::kOrdered;
    int fixed_i = -1;  // 0-based; used by the fixing modes
    int fixed_j = -1;
    int particles = 64;
    std::uint64_t seed = 0;

    MeasurePair sample(int dim, std::uint32_t index) const;
};

}  // namespace mckv
