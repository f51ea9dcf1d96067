#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mckv/error.hpp"
#include "mckv/model.hpp"
#include "mckv/rng.hpp"

using namespace mckv;
using nlohmann::json;

TEST_CASE("build_model accepts valid diffusion matrices") {
    CHECK_NOTHROW(build_model(json::parse(R"({"dim": 1, "drift": ["-x1"], "diffusion": [["0.5"]]})")));
    const auto m = build_model(json::parse(
        R"({"dim": 2, "drift": ["-x1", "-x2"], "diffusion": [["1", "-0.5"], ["-0.5", "1"]], "label": "ou2"})"));
    CHECK(m.dim() == 2);
    CHECK(m.label() == "ou2");
}

TEST_CASE("build_model rejects an indefinite diffusion") {
    CHECK_THROWS_AS(
        build_model(json::parse(R"({"dim": 2, "drift": ["0", "0"], "diffusion": [["1", "2"], ["2", "1"]]})")),
        PdError);
    CHECK_THROWS_AS(build_model(json::parse(R"({"dim": 1, "drift": ["x1 +"], "diffusion": [["1"]]})")),
                    ConfigError);
    CHECK_THROWS_AS(
        build_model(json::parse(R"({"dim": 2, "drift": ["0"], "diffusion": [["1", "0"], ["0", "1"]]})")),
        ConfigError);
}

TEST_CASE("diffusion_sqrt examples") {
    const Eigen::MatrixXd s = diffusion_sqrt(0.5 * Eigen::MatrixXd::Identity(2, 2));
    CHECK((s - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-12);

    Eigen::MatrixXd a(2, 2);
    a << 1, -0.5, -0.5, 1;
    const Eigen::MatrixXd r = diffusion_sqrt(a);
    CHECK(r(0, 0) == doctest::Approx(1.366).epsilon(1e-3));
    CHECK(r(0, 1) == doctest::Approx(-0.366).epsilon(1e-3));
    CHECK(r(1, 0) == doctest::Approx(-0.366).epsilon(1e-3));
    CHECK(r(1, 1) == doctest::Approx(1.366).epsilon(1e-3));

    CHECK_THROWS_AS(diffusion_sqrt(Eigen::MatrixXd::Constant(1, 1, -1.0)), PdError);
    CHECK_NOTHROW(diffusion_sqrt(Eigen::MatrixXd::Constant(1, 1, -1e-11)));
}

TEST_CASE("diffusion_sqrt squares back to 2a on random PD matrices") {
    PhiloxStream rng(3, StreamTag::kSampler, 0);
    for (int k = 0; k < 1000; ++k) {
        const int d = 1 + static_cast<int>(rng.below(8));
        Eigen::MatrixXd g(d, d);
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
        }
        const Eigen::MatrixXd a = g * g.transpose() + 1e-3 * Eigen::MatrixXd::Identity(d, d);
        const Eigen::MatrixXd s = diffusion_sqrt(a);
        CHECK((s * s.transpose() - 2.0 * a).norm() <= 1e-8 * (1.0 + a.norm()));
        CHECK((s - s.transpose()).norm() == 0.0);
    }
}

TEST_CASE("assembled diffusion is exactly symmetric") {
    const CoefficientModel m(3, {"0", "0", "0"},
                             {{"1 + x1^2", "0.3*tanh(x2*x3)", "0.1*sin(t)"}, {"", "2", "avg(y1*x2)/7"}, {"", "", "1"}});
    const EmpiricalMeasure mu(3, {0.1, 0.2, 0.3, -1.0, 0.7, 2.0});
    PhiloxStream rng(4, StreamTag::kSampler, 0);
    for (int k = 0; k < 200; ++k) {
        const std::vector<double> x{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
        const Eigen::MatrixXd a = m.diffusion_at(rng.uniform(), x, &mu);
        CHECK((a - a.transpose()).norm() == 0.0);
    }
}

namespace {

ModelPair pair_of(const std::vector<std::string>& drift, const std::vector<std::vector<std::string>>& diffusion) {
    return ModelPair::same(CoefficientModel(static_cast<int>(drift.size()), drift, diffusion));
}

}  // namespace

TEST_CASE("estimate_assumption_K examples") {
    DomainSampler sampler;
    sampler.seed = 5;
    sampler.particles = 16;

    const auto contracting = estimate_assumption_K(pair_of({"-x1"}, {{"0.5"}}), sampler, 300);
    CHECK(contracting.k_hat == 0.0);

    const auto expanding = estimate_assumption_K(pair_of({"2*x1", "2*x2"}, {{"0.5", "0"}, {"", "0.5"}}), sampler, 300);
    CHECK(expanding.k_hat == doctest::Approx(4.0).epsilon(1e-9));

    const auto mean_field =
        estimate_assumption_K(pair_of({"-x1 + avg(y1)", "-x2 + avg(y2)"}, {{"0.5", "0"}, {"", "0.5"}}), sampler, 300);
    CHECK(mean_field.k_hat <= 1.0 + 1e-9);
    CHECK(mean_field.samples_used > 0);
}

TEST_CASE("estimate_assumption_K is monotone in the sample count") {
    DomainSampler sampler;
    sampler.seed = 6;
    sampler.particles = 16;
    const auto pair = pair_of({"-x1 + 0.5*sin(x2) + avg(y2)", "x1 - x2"}, {{"1 + 0.2*tanh(x1)", "0"}, {"", "1"}});
    double prev = 0.0;
    for (std::size_t n : {1u, 5u, 20u, 80u, 200u}) {
        const double k = estimate_assumption_K(pair, sampler, n).k_hat;
        CHECK(k >= prev);
        prev = k;
    }
    CHECK_THROWS_AS(estimate_assumption_K(pair, sampler, 0), ConfigError);
}
