#pragma once

// Falsification tests for stochastic order and positive association.
// CONSISTENT never certifies the property: it only says no function in the
// finite family exposed a significant violation.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mckv/measure.hpp"
#include "mckv/test_functions.hpp"

namespace mckv {

enum class Verdict { kConsistent, kReject };

std::string to_string(Verdict v);

struct TestOptions {
    int n_boot = 1000;
    double alpha = 0.01;
    std::uint64_t seed = 0;
};

// Rejections additionally require the violation to exceed this absolute
// amount, so that summation round-off alone never rejects.
inline constexpr double kRoundoffFloor = 1e-12;

struct Margin {
    double estimate = 0.0;
    double se = 0.0;
    double z = 0.0;
};

struct OrderVerdict {
    Verdict verdict = Verdict::kConsistent;
    // Rejecting functional when REJECT, otherwise the worst-case one.
    std::string witness;
    int witness_index = -1;
    Margin margin;  // estimate = nu(f) - mu(f)
    double critical_z = 0.0;
    std::size_t functions_tested = 0;
    int n_boot = 0;
    double alpha = 0.0;

    nlohmann::json to_json() const;
};

struct FkgVerdict {
    Verdict verdict = Verdict::kConsistent;
    std::string witness_f;
    std::string witness_g;
    int witness_i = -1;
    int witness_j = -1;
    Margin margin;  // estimate = Cov(f, g)
    double critical_z = 0.0;
    std::size_t pairs_tested = 0;
    int n_boot = 0;
    double alpha = 0.0;

    nlohmann::json to_json() const;
};

// Upper normal quantile z_{1-p}.
double normal_upper_quantile(double p);

// Tests H0: nu(f) <= mu(f) for every f, Bonferroni over the family size.
OrderVerdict order_test(const EmpiricalMeasure& nu, const EmpiricalMeasure& mu, const TestFunctionFamily& family,
                        const TestOptions& opts = {});

// Tests H0: Cov_mu(f, g) >= 0 for every pair, Bonferroni over m^2. Needs N >= 10.
FkgVerdict fkg_test(const EmpiricalMeasure& mu, const TestFunctionFamily& family, const TestOptions& opts = {});

// Increasing path functionals built from a marginal family: f(X_{t_k}) at
// every grid node, f(componentwise running max) and f(time average).
struct PathFeatures {
    std::vector<double> values;  // row-major paths x functionals
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::string> names;
};

PathFeatures path_features(const PathEnsemble& e, const TestFunctionFamily& family);

OrderVerdict path_order_test(const PathEnsemble& lower, const PathEnsemble& upper, const TestFunctionFamily& family,
                             const TestOptions& opts = {});
FkgVerdict path_fkg_test(const PathEnsemble& e, const TestFunctionFamily& family, const TestOptions& opts = {});

// Feature-level cores shared by the marginal and path tests.
OrderVerdict order_test_features(const PathFeatures& lower, const PathFeatures& upper, const TestOptions& opts);
FkgVerdict fkg_test_features(const PathFeatures& f, const TestOptions& opts);

}  // namespace mckv
