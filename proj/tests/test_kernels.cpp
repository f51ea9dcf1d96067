#include <doctest.h>

#include <cstring>
#include <utility>
#include <vector>

#include "mckv/error.hpp"
#include "mckv/kernels.hpp"
#include "mckv/model.hpp"
#include "mckv/rng.hpp"
#include "mckv/sim.hpp"

using namespace mckv;

namespace {

EmpiricalMeasure cloud(int dim, std::size_t n, std::uint32_t stream) {
    PhiloxStream rng(31, StreamTag::kSampler, stream);
    std::vector<double> v(n * static_cast<std::size_t>(dim));
    for (auto& x : v) x = rng.normal();
    return EmpiricalMeasure(dim, std::move(v));
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

const CoefficientModel& model() {
    static const CoefficientModel m(2, {"-x1 + avg(y1*x2)", "-x2 + 0.5*sin(x1) + avg(y2)"},
                                    {{"0.5 + 0.1*tanh(x1)", "0.1*sigmoid(x2)"}, {"", "0.6"}});
    return m;
}

std::vector<double> euler_with(void (*step)(const kernels::EulerArgs&), const EmpiricalMeasure& mu) {
    std::vector<double> next(mu.values().size());
    const BoundModel bound(model(), 0.2, &mu);
    step({&bound, &mu, next, 0.2, 1e-2, 5, 3});
    return next;
}

}  // namespace

TEST_CASE("euler step: serial and omp agree bitwise") {
    const auto mu = cloud(2, 777, 0);
    const auto s = euler_with(kernels::serial::euler_step, mu);
    const auto o = euler_with(kernels::omp::euler_step, mu);
    CHECK(bitwise_equal(s, o));
}

TEST_CASE("bootstrap kernels: serial and omp agree bitwise") {
    const auto f = cloud(5, 503, 1);
    const kernels::BootstrapMeansArgs ma{f.values(), 503, 5, 64, 9, 2};
    CHECK(bitwise_equal(kernels::serial::bootstrap_means(ma), kernels::omp::bootstrap_means(ma)));

    std::vector<std::pair<int, int>> pairs{{0, 1}, {2, 4}, {3, 3}};
    const kernels::BootstrapCovArgs ca{f.values(), 503, 5, pairs, 64, 9};
    CHECK(bitwise_equal(kernels::serial::bootstrap_covariances(ca), kernels::omp::bootstrap_covariances(ca)));
}

TEST_CASE("results do not depend on the worker count") {
    const auto mu = cloud(2, 400, 3);
    SimConfig cfg;
    cfg.T = 0.2;
    cfg.dt = 0.01;
    cfg.particles = 400;
    cfg.seed = 4;
    cfg.save_every = 5;
    const int before = kernels::max_threads();
    std::vector<std::vector<double>> runs;
    std::vector<std::vector<double>> boots;
    for (int threads : {1, 2, 4}) {
        kernels::set_threads(threads);
        runs.push_back(simulate_mckean_vlasov(model(), mu, cfg).ensemble.values);
        boots.push_back(kernels::bootstrap_means({mu.values(), 400, 2, 50, 1, 0}));
    }
    kernels::set_threads(before);
    for (std::size_t k = 1; k < runs.size(); ++k) {
        CHECK(bitwise_equal(runs[0], runs[k]));
        CHECK(bitwise_equal(boots[0], boots[k]));
    }
}

TEST_CASE("euler step reports a failing particle") {
    const CoefficientModel m(1, {"1/x1"}, {{"0.5"}});
    const EmpiricalMeasure mu(1, {1.0, 0.0, 2.0});
    std::vector<double> next(3);
    const BoundModel bound(m, 0.0, &mu);
    CHECK_THROWS_AS(kernels::serial::euler_step({&bound, &mu, next, 0.0, 0.1, 0, 0}), Error);
    CHECK_THROWS_AS(kernels::omp::euler_step({&bound, &mu, next, 0.0, 0.1, 0, 0}), Error);
}
