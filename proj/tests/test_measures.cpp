#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "mckv/error.hpp"
#include "mckv/measure.hpp"
#include "mckv/pushforward.hpp"
#include "mckv/rng.hpp"
#include "mckv/samplers.hpp"
#include "mckv/test_functions.hpp"

using namespace mckv;

TEST_CASE("from_samples examples") {
    const auto mu = from_samples({{0.0}, {2.0}});
    CHECK(mu.size() == 2);
    CHECK(mu.mean()[0] == 1.0);
    const auto delta = from_samples({{1.0, 1.0}});
    CHECK(delta.size() == 1);
    CHECK(delta.dim() == 2);
    CHECK(delta.particle(0)[1] == 1.0);
    CHECK_THROWS_AS(from_samples({{0.0}, {std::nan("")}}), ConfigError);
    CHECK_THROWS_AS(from_samples({{0.0}, {1.0, 2.0}}), ConfigError);
    CHECK_THROWS_AS(from_samples(std::vector<std::vector<double>>{}), ConfigError);
}

TEST_CASE("increasing_pushforward examples") {
    const auto nu = from_samples({{0.0}, {2.0}});
    const auto mu = increasing_pushforward(nu, MonotoneMap::shift({1.0}));
    CHECK(mu == from_samples({{1.0}, {3.0}}));
    CHECK(increasing_pushforward(nu, MonotoneMap::identity()) == nu);

    const auto cubic = MonotoneMap::expressions({parse_expr("x1^3 + x1", 1)});
    const auto pm = from_samples({{-1.0}, {1.0}});
    CHECK_THROWS_AS(increasing_pushforward(pm, cubic, true), ConfigError);
    CHECK(increasing_pushforward(pm, cubic, false) == from_samples({{-2.0}, {2.0}}));
    CHECK_THROWS_AS(increasing_pushforward(pm, MonotoneMap::expressions({parse_expr("-x1", 1)}), false), ConfigError);
}

TEST_CASE("every family item is componentwise nondecreasing on 1000 pairs") {
    for (int dim : {1, 2, 4}) {
        FamilySpec spec;
        spec.seed = 9;
        const auto fam = make_increasing_family(dim, spec);
        CHECK(fam.size() == static_cast<std::size_t>(64 + 64 + dim));
        PhiloxStream rng(9, StreamTag::kSampler, static_cast<std::uint32_t>(dim));
        for (int k = 0; k < 1000; ++k) {
            std::vector<double> x(static_cast<std::size_t>(dim)), y(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) {
                x[i] = rng.uniform(-4, 4);
                y[i] = x[i] + (rng.uniform() < 0.3 ? 0.0 : rng.uniform(0, 2));
            }
            for (const auto& f : fam.items) REQUIRE(f(x) <= f(y));
        }
    }
}

TEST_CASE("family items honour the ignore mask and are deterministic") {
    FamilySpec spec;
    spec.seed = 2;
    spec.ignore = {1};
    const auto a = make_increasing_family(3, spec);
    const auto b = make_increasing_family(3, spec);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a.items[k].ignores(1));
        CHECK(a.items[k].describe() == b.items[k].describe());
        const std::vector<double> x{0.3, -5.0, 0.1}, y{0.3, 5.0, 0.1};
        CHECK(a.items[k](x) == a.items[k](y));
    }
}

TEST_CASE("mixture examples") {
    const auto mu1 = from_samples({{0.0}, {2.0}});
    const auto mu2 = from_samples({{4.0}, {6.0}});
    const auto mix = mixture(mu1, mu2);
    CHECK(mix.size() == 4);
    CHECK(mix.mean()[0] == 0.5 * (mu1.mean()[0] + mu2.mean()[0]));

    PhiloxStream rng(1, StreamTag::kSampler, 0);
    std::vector<double> v(2 * 300);
    for (auto& x : v) x = rng.normal();
    const EmpiricalMeasure g(2, v);
    const auto self = mixture(g, g);
    CHECK(self.size() == 600);
    for (int i = 0; i < 2; ++i) CHECK(self.mean()[static_cast<std::size_t>(i)] == doctest::Approx(g.mean()[static_cast<std::size_t>(i)]).epsilon(1e-12));
    const auto cov_self = self.covariance();
    const auto cov = g.covariance();
    for (std::size_t k = 0; k < cov.size(); ++k) CHECK(cov_self[k] == doctest::Approx(cov[k]).epsilon(1e-12));

    const auto uneven = mixture(mu1, from_samples({{1.0}, {2.0}, {3.0}}), 4);
    CHECK(uneven.size() == 6);
    CHECK_THROWS_AS(mixture(mu1, g), DimensionError);
}

TEST_CASE("mixture mean is the average of the means") {
    PhiloxStream rng(8, StreamTag::kSampler, 0);
    for (int k = 0; k < 50; ++k) {
        std::vector<double> a(3 * 32), b(3 * 32);
        // Dyadic values keep every sum exact.
        for (auto& x : a) x = std::ldexp(static_cast<double>(rng.below(64)) - 32.0, -3);
        for (auto& x : b) x = std::ldexp(static_cast<double>(rng.below(64)) - 32.0, -3);
        const EmpiricalMeasure m1(3, a), m2(3, b);
        const auto mix = mixture(m1, m2);
        for (std::size_t i = 0; i < 3; ++i) CHECK(mix.mean()[i] == 0.5 * (m1.mean()[i] + m2.mean()[i]));
    }
}

TEST_CASE("flow and ensemble CSV round trip") {
    PhiloxStream rng(2, StreamTag::kSampler, 0);
    PathEnsemble e;
    e.grid = {0.0, 0.1, 0.30000000000000004};
    e.paths = 5;
    e.dim = 2;
    e.values.resize(e.paths * e.grid.size() * 2);
    for (auto& v : e.values) v = rng.normal() * 1e3;
    std::stringstream ss;
    write_ensemble_csv(ss, e);
    const auto back = read_ensemble_csv(ss);
    CHECK(back.grid == e.grid);
    CHECK(back.paths == e.paths);
    CHECK(back.values == e.values);

    const auto flow = e.flow();
    std::stringstream fs;
    write_flow_csv(fs, flow);
    const auto fback = read_flow_csv(fs);
    CHECK(fback.grid == flow.grid);
    CHECK(fback.nodes == flow.nodes);

    std::stringstream pts("x1,x2\n1,2\n3,4.5\n");
    CHECK(read_points_csv(pts) == from_samples({{1.0, 2.0}, {3.0, 4.5}}));
    std::stringstream bad("1,2\n3\n");
    CHECK_THROWS_AS(read_points_csv(bad), ConfigError);
}

TEST_CASE("flow lookup is left-continuous") {
    const auto flow = constant_flow(from_samples({{0.0}}), {0.0, 0.5, 1.0});
    CHECK(flow.node_at_or_before(0.0) == 0);
    CHECK(flow.node_at_or_before(0.49) == 0);
    CHECK(flow.node_at_or_before(0.5) == 1);
    CHECK(flow.node_at_or_before(1.0) == 2);
    MeasureFlow bad = flow;
    bad.grid = {0.0, 0.0, 1.0};
    CHECK_THROWS(bad.validate());
}

TEST_CASE("pair samplers order particle-wise and fix coordinates exactly") {
    for (auto mode : {PairingMode::kOrdered, PairingMode::kOrderedFixing, PairingMode::kOrderedFixingPair,
                      PairingMode::kEqual}) {
        MeasurePairSampler s;
        s.mode = mode;
        s.fixed_i = 0;
        s.fixed_j = 2;
        s.particles = 27;
        s.seed = 3;
        for (std::uint32_t k = 0; k < 100; ++k) {
            const auto p = s.sample(3, k);
            REQUIRE(p.lower.size() == p.upper.size());
            for (std::size_t q = 0; q < p.lower.size(); ++q) {
                for (int i = 0; i < 3; ++i) {
                    const double lo = p.lower.particle(q)[static_cast<std::size_t>(i)];
                    const double up = p.upper.particle(q)[static_cast<std::size_t>(i)];
                    REQUIRE(lo <= up);
                    const bool fixed = mode == PairingMode::kEqual ||
                                       (mode != PairingMode::kOrdered && i == 0) ||
                                       (mode == PairingMode::kOrderedFixingPair && i == 2);
                    if (fixed) REQUIRE(lo == up);
                }
            }
        }
    }
}

TEST_CASE("domain samples are pure functions of the index") {
    DomainSampler s;
    s.seed = 12;
    const auto a = s.sample(2, 17);
    const auto b = s.sample(2, 17);
    CHECK(a.t == b.t);
    CHECK(a.x == b.x);
    CHECK(a.mu == b.mu);
    CHECK(s.sample(2, 18).x != a.x);
    for (std::uint32_t k = 0; k < 200; ++k) {
        const auto d = s.sample(2, k);
        CHECK(d.t >= s.box.t_lo);
        CHECK(d.t <= s.box.t_hi);
        for (double v : d.x) {
            CHECK(v >= s.box.x_lo);
            CHECK(v <= s.box.x_hi);
        }
    }
}

TEST_CASE("product grids are tensor grids") {
    CHECK(grid_points_per_coordinate(1, 64) == 64);
    CHECK(grid_points_per_coordinate(2, 64) == 8);
    CHECK(grid_points_per_coordinate(3, 64) == 4);
    CHECK(grid_points_per_coordinate(8, 64) == 2);
    PhiloxStream rng(1, StreamTag::kSampler, 0);
    const auto mu = draw_measure(MeasureFamily::kProductGaussian, 2, 64, rng);
    CHECK(mu.size() == 64);
}
