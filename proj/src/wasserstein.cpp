#include "mckv/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mckv/error.hpp"
#include "mckv/rng.hpp"

namespace mckv {

double w2_squared_sorted_1d(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw ConfigError("w2: empty measure");
    if (a.size() == b.size()) {
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
        return s / static_cast<double>(a.size());
    }
    // Integrate (F^-1 - G^-1)^2 over the merged quantile breakpoints k/n, l/m.
    const double n = static_cast<double>(a.size());
    const double m = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double u = 0.0, s = 0.0;
    while (i < a.size() && j < b.size()) {
        const double next_a = static_cast<double>(i + 1) / n;
        const double next_b = static_cast<double>(j + 1) / m;
        const double next = std::min(next_a, next_b);
        s += (next - u) * (a[i] - b[j]) * (a[i] - b[j]);
        u = next;
        // Compare in integer arithmetic to avoid skipping on ties.
        const auto lhs = (i + 1) * b.size();
        const auto rhs = (j + 1) * a.size();
        if (lhs <= rhs) ++i;
        if (rhs <= lhs) ++j;
    }
    return s;
}

namespace {

double w2_exact_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.dim() != 1) throw DimensionError("w2 exact_1d requires dimension 1");
    std::vector<double> a(mu.values().begin(), mu.values().end());
    std::vector<double> b(nu.values().begin(), nu.values().end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return std::sqrt(w2_squared_sorted_1d(a, b));
}

double w2_assignment(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.size() != nu.size()) throw ConfigError("w2 exact_assignment requires equal particle counts");
    if (mu.size() > kMaxAssignmentSize) {
        throw ConfigError("w2 exact_assignment limited to N <= 512; use sliced");
    }
    const std::size_t n = mu.size();
    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        auto p = mu.particle(i);
        for (std::size_t j = 0; j < n; ++j) {
            auto q = nu.particle(j);
            double c = 0.0;
            for (std::size_t k = 0; k < p.size(); ++k) c += (p[k] - q[k]) * (p[k] - q[k]);
            cost[i * n + j] = c;
        }
    }
    const std::vector<int> match = solve_assignment(cost, n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost[i * n + static_cast<std::size_t>(match[i])];
    return std::sqrt(std::max(0.0, total / static_cast<double>(n)));
}

double w2_sliced(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int projections, std::uint64_t seed) {
    if (projections < 1) throw ConfigError("sliced w2 needs at least one projection");
    const auto d = static_cast<std::size_t>(mu.dim());
    std::vector<double> per(static_cast<std::size_t>(projections));
#pragma omp parallel for schedule(static)
    for (int k = 0; k < projections; ++k) {
        PhiloxStream rng(seed, StreamTag::kSliced, static_cast<std::uint32_t>(k));
        std::vector<double> theta(d);
        double norm = 0.0;
        while (norm < 1e-12) {
            norm = 0.0;
            for (double& v : theta) {
                v = rng.normal();
                norm += v * v;
            }
        }
        norm = std::sqrt(norm);
        for (double& v : theta) v /= norm;
        auto project = [&](const EmpiricalMeasure& m) {
            std::vector<double> out(m.size());
            for (std::size_t p = 0; p < m.size(); ++p) {
                auto x = m.particle(p);
                double s = 0.0;
                for (std::size_t i = 0; i < d; ++i) s += theta[i] * x[i];
                out[p] = s;
            }
            std::sort(out.begin(), out.end());
            return out;
        };
        const auto a = project(mu);
        const auto b = project(nu);
        per[static_cast<std::size_t>(k)] = w2_squared_sorted_1d(a, b);
    }
    double s = 0.0;
    for (double v : per) s += v;
    return std::sqrt(s / static_cast<double>(projections));
}

}  // namespace

std::vector<int> solve_assignment(std::span<const double> cost, std::size_t n) {
    // Shortest augmenting path with row/column potentials, O(n^3).
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> match(n);
    for (std::size_t j = 1; j <= n; ++j) match[p[j] - 1] = static_cast<int>(j - 1);
    return match;
}

double w2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, W2Method method) {
    if (mu.empty() || nu.empty()) throw ConfigError("w2: empty measure");
    if (mu.dim() != nu.dim()) throw DimensionError("w2: dimension mismatch");
    switch (method.kind) {
        case W2Method::Kind::kExact1d: return w2_exact_1d(mu, nu);
        case W2Method::Kind::kExactAssignment: return w2_assignment(mu, nu);
        case W2Method::Kind::kSliced: return w2_sliced(mu, nu, method.projections, method.seed);
        case W2Method::Kind::kAuto:
            if (mu.dim() == 1) return w2_exact_1d(mu, nu);
            if (mu.size() == nu.size() && mu.size() <= kMaxAssignmentSize) return w2_assignment(mu, nu);
            return w2_sliced(mu, nu, 128, method.seed);
    }
    return 0.0;
}

double w2_lambda(const MeasureFlow& f1, const MeasureFlow& f2, double lambda, W2Method method) {
    if (lambda < 0.0) throw ConfigError("w2_lambda: lambda must be nonnegative");
    f1.validate();
    f2.validate();
    if (f1.grid != f2.grid) throw ConfigError("w2_lambda: flows are on different grids");
    double best = 0.0;
    for (std::size_t k = 0; k < f1.grid.size(); ++k) {
        const double d = w2(f1.nodes[k], f2.nodes[k], method);
        best = std::max(best, std::exp(-lambda * f1.grid[k]) * d);
    }
    return best;
}

}  // namespace mckv
