#include "mckv/samplers.hpp"

#include <cmath>

#include "mckv/error.hpp"
#include "mckv/pushforward.hpp"

namespace mckv {

std::string to_string(MeasureFamily f) {
    switch (f) {
        case MeasureFamily::kProductGaussian: return "product_gaussian";
        case MeasureFamily::kProductUniform: return "product_uniform";
        case MeasureFamily::kDelta: return "delta";
        case MeasureFamily::kPositiveMixed: return "positive_mixed";
        case MeasureFamily::kNegativeMixed: return "negative_mixed";
    }
    return "?";
}

std::string to_string(PairingMode m) {
    switch (m) {
        case PairingMode::kOrdered: return "ordered";
        case PairingMode::kOrderedFixing: return "ordered_fixing_i";
        case PairingMode::kEqual: return "equal";
        case PairingMode::kOrderedFixingPair: return "ordered_fixing_ij";
    }
    return "?";
}

std::vector<MeasureFamily> all_families() {
    return {MeasureFamily::kProductGaussian, MeasureFamily::kProductUniform, MeasureFamily::kDelta,
            MeasureFamily::kPositiveMixed, MeasureFamily::kNegativeMixed};
}

std::vector<MeasureFamily> positive_families() {
    return {MeasureFamily::kProductGaussian, MeasureFamily::kProductUniform, MeasureFamily::kDelta,
            MeasureFamily::kPositiveMixed};
}

int grid_points_per_coordinate(int dim, int target_particles) {
    int m = static_cast<int>(std::floor(std::pow(static_cast<double>(target_particles), 1.0 / dim) + 1e-9));
    return std::max(2, m);
}

namespace {

std::vector<double> draw_marginal(MeasureFamily family, int m, PhiloxStream& rng) {
    std::vector<double> v(static_cast<std::size_t>(m));
    if (family == MeasureFamily::kProductUniform) {
        const double lo = rng.uniform(-3.0, 1.0);
        const double width = rng.uniform(0.5, 3.0);
        for (double& x : v) x = rng.uniform(lo, lo + width);
    } else {
        const double mean = rng.uniform(-2.0, 2.0);
        const double sd = rng.uniform(0.2, 1.5);
        for (double& x : v) x = mean + sd * rng.normal();
    }
    return v;
}

// All combinations of the per-coordinate values, last coordinate fastest.
std::vector<double> tensor_grid(const std::vector<std::vector<double>>& marginals) {
    const std::size_t d = marginals.size();
    std::size_t total = 1;
    for (const auto& m : marginals) total *= m.size();
    std::vector<double> out(total * d);
    std::vector<std::size_t> idx(d, 0);
    for (std::size_t p = 0; p < total; ++p) {
        for (std::size_t i = 0; i < d; ++i) out[p * d + i] = marginals[i][idx[i]];
        for (std::size_t i = d; i-- > 0;) {
            if (++idx[i] < marginals[i].size()) break;
            idx[i] = 0;
        }
    }
    return out;
}

void mix_coordinates(std::vector<double>& v, int dim, double weight) {
    const auto d = static_cast<std::size_t>(dim);
    std::vector<double> row(d);
    for (std::size_t p = 0; p < v.size() / d; ++p) {
        double total = 0.0;
        for (std::size_t i = 0; i < d; ++i) total += v[p * d + i];
        for (std::size_t i = 0; i < d; ++i) row[i] = v[p * d + i] + weight * (total - v[p * d + i]);
        std::copy(row.begin(), row.end(), v.begin() + static_cast<std::ptrdiff_t>(p * d));
    }
}

}  // namespace

EmpiricalMeasure draw_measure(MeasureFamily family, int dim, int target_particles, PhiloxStream& rng) {
    if (dim < 1) throw ConfigError("draw_measure: dimension must be positive");
    const int m = grid_points_per_coordinate(dim, target_particles);
    if (family == MeasureFamily::kDelta) {
        std::vector<double> point(static_cast<std::size_t>(dim));
        for (double& x : point) x = rng.uniform(-3.0, 3.0);
        std::size_t count = 1;
        for (int i = 0; i < dim; ++i) count *= static_cast<std::size_t>(m);
        std::vector<double> v;
        v.reserve(count * point.size());
        for (std::size_t k = 0; k < count; ++k) v.insert(v.end(), point.begin(), point.end());
        return EmpiricalMeasure(dim, std::move(v));
    }
    const MeasureFamily marginal_family =
        family == MeasureFamily::kProductUniform ? MeasureFamily::kProductUniform : MeasureFamily::kProductGaussian;
    std::vector<std::vector<double>> marginals;
    for (int i = 0; i < dim; ++i) marginals.push_back(draw_marginal(marginal_family, m, rng));
    std::vector<double> v = tensor_grid(marginals);
    if (family == MeasureFamily::kPositiveMixed && dim > 1) {
        mix_coordinates(v, dim, rng.uniform(0.1, 0.6));
    } else if (family == MeasureFamily::kNegativeMixed && dim > 1) {
        mix_coordinates(v, dim, -rng.uniform(0.3, 0.8));
    }
    return EmpiricalMeasure(dim, std::move(v));
}

EmpiricalMeasure draw_split_product_measure(int dim, int i, int target_particles, PhiloxStream& rng) {
    if (dim == 1) return draw_measure(MeasureFamily::kProductGaussian, 1, target_particles, rng);
    const int m = grid_points_per_coordinate(dim, target_particles);
    const auto families = positive_families();
    const MeasureFamily rest_family = families[rng.below(static_cast<std::uint32_t>(families.size()))];
    std::size_t rest_target = 1;
    for (int k = 0; k < dim - 1; ++k) rest_target *= static_cast<std::size_t>(m);
    const EmpiricalMeasure rest = draw_measure(rest_family, dim - 1, static_cast<int>(rest_target), rng);
    const std::vector<double> col =
        draw_marginal(rng.uniform() < 0.5 ? MeasureFamily::kProductGaussian : MeasureFamily::kProductUniform, m, rng);

    const auto d = static_cast<std::size_t>(dim);
    std::vector<double> v;
    v.reserve(col.size() * rest.size() * d);
    for (double c : col) {
        for (std::size_t p = 0; p < rest.size(); ++p) {
            auto r = rest.particle(p);
            std::size_t q = 0;
            for (std::size_t k = 0; k < d; ++k) v.push_back(static_cast<int>(k) == i ? c : r[q++]);
        }
    }
    return EmpiricalMeasure(dim, std::move(v));
}

DomainSample DomainSampler::sample(int dim, std::uint32_t index) const {
    if (families.empty()) throw ConfigError("DomainSampler: no measure families");
    PhiloxStream rng(seed, StreamTag::kSampler, index, 0);
    DomainSample s;
    s.t = rng.uniform(box.t_lo, box.t_hi);
    s.x.resize(static_cast<std::size_t>(dim));
    for (double& v : s.x) v = rng.uniform(box.x_lo, box.x_hi);
    const MeasureFamily fam = families[rng.below(static_cast<std::uint32_t>(families.size()))];
    s.mu = draw_measure(fam, dim, particles, rng);
    return s;
}

MeasurePair MeasurePairSampler::sample(int dim, std::uint32_t index) const {
    if (families.empty()) throw ConfigError("MeasurePairSampler: no measure families");
    PhiloxStream rng(seed, StreamTag::kSampler, index, 1);
    const MeasureFamily fam = families[rng.below(static_cast<std::uint32_t>(families.size()))];
    MeasurePair pair;
    pair.lower = draw_measure(fam, dim, particles, rng);
    if (mode == PairingMode::kEqual) {
        pair.upper = pair.lower;
        return pair;
    }
    const auto d = static_cast<std::size_t>(dim);
    std::vector<double> offset(d), slope(d);
    for (std::size_t k = 0; k < d; ++k) {
        offset[k] = rng.uniform() < 0.25 ? 0.0 : rng.uniform(0.0, 2.0);
        slope[k] = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.0, 1.0);
    }
    auto freeze = [&](int c) {
        if (c >= 0 && c < dim) {
            offset[static_cast<std::size_t>(c)] = 0.0;
            slope[static_cast<std::size_t>(c)] = 0.0;
        }
    };
    if (mode == PairingMode::kOrderedFixing || mode == PairingMode::kOrderedFixingPair) freeze(fixed_i);
    if (mode == PairingMode::kOrderedFixingPair) freeze(fixed_j);
    const MonotoneMap map = MonotoneMap::shift_tanh(offset, slope);
    std::vector<double> out(pair.lower.values().size());
    for (std::size_t p = 0; p < pair.lower.size(); ++p) {
        map.apply(pair.lower.particle(p), std::span<double>(out.data() + p * d, d));
    }
    pair.upper = EmpiricalMeasure(dim, std::move(out));
    return pair;
}

}  // namespace mckv
