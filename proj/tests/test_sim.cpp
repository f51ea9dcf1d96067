#include <doctest.h>

#include <cmath>
#include <vector>

#include "mckv/error.hpp"
#include "mckv/measure.hpp"
#include "mckv/model.hpp"
#include "mckv/sim.hpp"
#include "mckv/stat_tests.hpp"
#include "mckv/test_functions.hpp"

using namespace mckv;

namespace {

EmpiricalMeasure point_cloud(std::vector<double> point, std::size_t n) {
    const int d = static_cast<int>(point.size());
    std::vector<double> v;
    v.reserve(n * point.size());
    for (std::size_t k = 0; k < n; ++k) v.insert(v.end(), point.begin(), point.end());
    return EmpiricalMeasure(d, std::move(v));
}

SimConfig config(double T, double dt, std::size_t n, std::uint64_t seed, std::size_t save_every = 10) {
    SimConfig c;
    c.T = T;
    c.dt = dt;
    c.particles = n;
    c.seed = seed;
    c.save_every = save_every;
    return c;
}

double sample_sd(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

const CoefficientModel& brownian2() {
    static const CoefficientModel m(2, {"0", "0"}, {{"0.5", "0"}, {"", "0.5"}});
    return m;
}

const CoefficientModel& mf_ou1() {
    static const CoefficientModel m(1, {"-x1 + avg(y1)"}, {{"0.5"}});
    return m;
}

}  // namespace

TEST_CASE("SimConfig validation and grid") {
    auto c = config(1.0, 0.1, 10, 0, 3);
    CHECK(c.steps() == 10);
    const auto g = c.checkpoint_grid();
    REQUIRE(g.size() == 5);
    CHECK(g.front() == 0.0);
    CHECK(g.back() == 1.0);
    CHECK(g[1] == doctest::Approx(0.3));
    CHECK_THROWS_AS(config(1.0, 0.3, 10, 0).validate(), ConfigError);
    CHECK_THROWS_AS(config(-1.0, 0.1, 10, 0).validate(), ConfigError);
    CHECK_THROWS_AS(config(1.0, 0.0, 10, 0).validate(), ConfigError);
}

TEST_CASE("Brownian motion has covariance t") {
    const auto r = simulate_mckean_vlasov(brownian2(), point_cloud({0.0, 0.0}, 10000), config(1.0, 0.01, 10000, 1));
    const auto terminal = r.flow.nodes.back();
    const auto cov = terminal.covariance();
    const double n = 10000.0;
    // Var of the sample variance of N(0,1) is 2/N; of the sample covariance 1/N.
    CHECK(std::abs(cov[0] - 1.0) < 3.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(cov[3] - 1.0) < 3.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(cov[1]) < 3.0 * std::sqrt(1.0 / n));
    CHECK(r.ensemble.paths == 10000);
    CHECK(r.ensemble.grid == r.flow.grid);
}

TEST_CASE("mean-field OU keeps its mean") {
    const auto r = simulate_mckean_vlasov(mf_ou1(), point_cloud({1.0}, 4000), config(1.0, 0.01, 4000, 2));
    for (const auto& node : r.flow.nodes) {
        const double se = sample_sd(node.column(0)) / std::sqrt(4000.0);
        CHECK(std::abs(node.mean()[0] - 1.0) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("T = s returns the initial cloud") {
    const EmpiricalMeasure mu0(1, {0.5, -1.0, 2.0});
    auto c = config(0.3, 0.1, 3, 3);
    c.s = 0.3;
    const auto r = simulate_mckean_vlasov(mf_ou1(), mu0, c);
    REQUIRE(r.flow.nodes.size() == 1);
    CHECK(r.flow.nodes[0] == mu0);
    const auto d = simulate_decoupled(mf_ou1(), constant_flow(mu0, {0.3}), mu0, c);
    CHECK(d.marginal(0) == mu0);
}

TEST_CASE("mean-field models need at least two particles") {
    CHECK_THROWS_AS(simulate_mckean_vlasov(mf_ou1(), point_cloud({0.0}, 1), config(1.0, 0.1, 1, 0)), ConfigError);
}

TEST_CASE("decoupled SDE against a frozen delta relaxes as 1 - exp(-t)") {
    const auto frozen = constant_flow(from_samples({{1.0}}), {0.0, 1.0});
    const auto e = simulate_decoupled(mf_ou1(), frozen, point_cloud({0.0}, 10000), config(1.0, 0.001, 10000, 4, 100));
    const auto last = e.marginal(e.nodes() - 1);
    const double se = sample_sd(last.column(0)) / 100.0;
    CHECK(std::abs(last.mean()[0] - (1.0 - std::exp(-1.0))) <= 3.0 * se);
}

TEST_CASE("decoupled paths ignore the frozen flow when the model does not read it") {
    const CoefficientModel m(1, {"-x1 + sin(t)"}, {{"0.5 + 0.1*tanh(x1)"}});
    const auto mu0 = point_cloud({0.2}, 200);
    const auto a = simulate_decoupled(m, constant_flow(from_samples({{5.0}}), {0.0, 1.0}), mu0, config(1.0, 0.01, 200, 5));
    const auto b = simulate_decoupled(m, constant_flow(from_samples({{-3.0}, {7.0}}), {0.0, 1.0}), mu0, config(1.0, 0.01, 200, 5));
    CHECK(a.values == b.values);
    const auto frozen_short = constant_flow(from_samples({{1.0}}), {0.5});
    CHECK_THROWS_AS(simulate_decoupled(mf_ou1(), frozen_short, mu0, config(1.0, 0.01, 200, 5)), ConfigError);
}

TEST_CASE("simulation is deterministic given the seed") {
    const auto mu0 = point_cloud({0.0}, 300);
    const auto a = simulate_mckean_vlasov(mf_ou1(), mu0, config(0.5, 0.01, 300, 6));
    const auto b = simulate_mckean_vlasov(mf_ou1(), mu0, config(0.5, 0.01, 300, 6));
    const auto c = simulate_mckean_vlasov(mf_ou1(), mu0, config(0.5, 0.01, 300, 7));
    CHECK(a.ensemble.values == b.ensemble.values);
    CHECK(a.ensemble.values != c.ensemble.values);
}

TEST_CASE("zero noise keeps paths at their initial points") {
    const CoefficientModel m(2, {"0", "0"}, {{"1e-12", "0"}, {"", "1e-12"}});
    const EmpiricalMeasure mu0(2, {0.0, 1.0, -2.0, 0.5, 3.0, -3.0});
    const auto r = simulate_mckean_vlasov(m, mu0, config(1.0, 0.01, 3, 8));
    for (std::size_t p = 0; p < r.ensemble.paths; ++p) {
        for (std::size_t k = 0; k < r.ensemble.nodes(); ++k) {
            for (int i = 0; i < 2; ++i) CHECK(std::abs(r.ensemble.at(p, k, i) - r.ensemble.at(p, 0, i)) < 1e-4);
        }
    }
}

TEST_CASE("halving dt leaves the terminal mean within 3 SE") {
    const CoefficientModel m(1, {"0"}, {{"0.5"}});
    const auto mu0 = point_cloud({0.0}, 10000);
    const auto coarse = simulate_mckean_vlasov(m, mu0, config(1.0, 0.02, 10000, 9, 50)).flow.nodes.back();
    const auto fine = simulate_mckean_vlasov(m, mu0, config(1.0, 0.01, 10000, 9, 100)).flow.nodes.back();
    const double se = std::sqrt(2.0 / 10000.0);
    CHECK(std::abs(coarse.mean()[0] - fine.mean()[0]) < 3.0 * se);
}

TEST_CASE("Picard on a measure-independent model stops at iteration 2 with distance 0") {
    const CoefficientModel m(1, {"-x1"}, {{"0.5"}});
    PicardOptions o;
    o.lambda = 1.0;
    const auto r = picard_solve(m, point_cloud({1.0}, 200), config(1.0, 0.01, 200, 10), o);
    REQUIRE(r.trace.distances.size() == 2);
    CHECK(r.trace.distances[1] == 0.0);
    CHECK(r.trace.converged);
    CHECK(r.trace.iterations == 2);
    REQUIRE(r.trace.iterates.size() == 2);
    CHECK(r.trace.iterates[0].nodes == r.trace.iterates[1].nodes);
}

TEST_CASE("Picard on mean-field OU converges to mean one") {
    PicardOptions o;
    o.tol = 1e-6;
    o.max_iter = 12;
    o.k_samples = 200;
    const auto r = picard_solve(mf_ou1(), point_cloud({1.0}, 1000), config(1.0, 0.01, 1000, 11), o);
    CHECK(r.trace.lambda > 0.0);
    CHECK(r.trace.converged);
    for (const auto& node : r.flow.nodes) CHECK(std::abs(node.mean()[0] - 1.0) < 0.1);
    for (std::size_t k = 1; k + 1 < r.trace.distances.size() && k < 5; ++k) {
        if (r.trace.distances[k] > 0.0) CHECK(r.trace.distances[k + 1] <= 0.75 * r.trace.distances[k]);
    }
    const auto j = r.trace.to_json();
    CHECK(j.at("distances").size() == r.trace.distances.size());
}

TEST_CASE("comonotone coupling examples") {
    const auto nu = from_samples({{2.0}, {0.0}});
    const auto mu = from_samples({{3.0}, {1.0}});
    const auto q = comonotone_coupling(nu, mu, {CouplingMode::Kind::kQuantile1d, {}});
    CHECK(q.lower == from_samples({{0.0}, {2.0}}));
    CHECK(q.upper == from_samples({{1.0}, {3.0}}));

    const auto id = comonotone_coupling(nu, nu, {CouplingMode::Kind::kIdentity, {}});
    CHECK(id.lower == id.upper);

    const auto push = comonotone_coupling(nu, EmpiricalMeasure{}, {CouplingMode::Kind::kPushforward, MonotoneMap::shift({1.0})});
    CHECK(push.upper == from_samples({{3.0}, {1.0}}));

    CHECK_THROWS_AS(comonotone_coupling(mu, nu, {CouplingMode::Kind::kQuantile1d, {}}), ConfigError);
    CHECK_THROWS_AS(comonotone_coupling(mu, nu, {CouplingMode::Kind::kIdentity, {}}), ConfigError);
}

TEST_CASE("coupled runs of identical systems stay identical") {
    const CoefficientModel m(2, {"-x1 + avg(y2)", "-x2 + 0.3*sin(x1)"}, {{"0.5", "0.1"}, {"", "0.5"}});
    const auto mu0 = point_cloud({0.3, -0.1}, 300);
    const auto run = coupled_order_run(ModelPair::same(m), {mu0, mu0}, config(0.5, 0.01, 300, 12));
    CHECK(run.lower.values == run.upper.values);
    for (double f : run.ordered_fraction) CHECK(f == 1.0);
}

TEST_CASE("coupled mean-field OU from ordered deltas stays ordered") {
    const auto run = coupled_order_run(ModelPair::same(mf_ou1()), {point_cloud({0.0}, 2000), point_cloud({1.0}, 2000)},
                                       config(1.0, 0.001, 2000, 13, 100));
    for (double f : run.ordered_fraction) CHECK(f >= 0.995);
}

TEST_CASE("order-violating drift breaks the coupled order") {
    const CoefficientModel m(2, {"-x1 - x2", "-x2"}, {{"0.5", "0"}, {"", "0.5"}});
    const auto run = coupled_order_run(ModelPair::same(m), {point_cloud({0.0, 0.0}, 2000), point_cloud({0.0, 1.0}, 2000)},
                                       config(1.0, 0.01, 2000, 14, 100));
    const auto lo = run.lower.marginal(run.lower.nodes() - 1);
    const auto up = run.upper.marginal(run.upper.nodes() - 1);
    CHECK(up.mean()[0] == doctest::Approx(-std::exp(-1.0)).epsilon(0.15));
    CHECK(std::abs(lo.mean()[0]) < 0.1);
    FamilySpec spec;
    spec.reference = &up;
    CHECK(order_test(lo, up, make_increasing_family(2, spec)).verdict == Verdict::kReject);
}
