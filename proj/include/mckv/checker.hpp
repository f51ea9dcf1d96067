#pragma once

// Sampled structural predicates on coefficient models. PASS means no violation
// was found among the drawn samples; it is never a proof.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mckv/measure.hpp"
#include "mckv/model.hpp"
#include "mckv/samplers.hpp"
#include "mckv/test_functions.hpp"

namespace mckv {

enum class CheckVerdict { kPass, kFail };

std::string to_string(CheckVerdict v);

struct CheckReport {
    std::string id;
    CheckVerdict verdict = CheckVerdict::kPass;
    // Sampled tuple and evaluated sides of the first violating sample; null on PASS.
    nlohmann::json witness;
    std::size_t samples_used = 0;
    double tolerance = 0.0;
    std::uint64_t seed = 0;
    // Largest observed violation amount (positive means violated).
    double worst_excess = 0.0;

    bool passed() const noexcept { return verdict == CheckVerdict::kPass; }
    nlohmann::json to_json() const;
};

struct CheckOptions {
    std::size_t n = 10000;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    int particles = 64;
    SamplingBox box;
};

// Which measures the locality check ranges over.
enum class LocalityScope { kAll, kPositive, kDelta };

std::string to_string(LocalityScope s);

// lower.b_i(t, x, nu) <= upper.b_i(t, y, mu) + tol for x <= y with x_i = y_i and nu <= mu.
CheckReport check_drift_comparison(const ModelPair& pair, int i, const CheckOptions& opts);

// |a_ij(t, x, mu) - a_ij(t, x', mu)| <= tol where x' moves only coordinates
// outside {i, j} (8 perturbations uniform on [-2, 2] per base point).
CheckReport check_diffusion_locality(const CoefficientModel& model, int i, int j, LocalityScope scope,
                                     const CheckOptions& opts);
// Every pair i <= j at once.
CheckReport check_diffusion_locality(const CoefficientModel& model, LocalityScope scope, const CheckOptions& opts);

// max |a - a_bar| <= tol.
CheckReport check_diffusion_equality(const ModelPair& pair, const CheckOptions& opts);

// a_ij >= -tol for every entry, with mu drawn from the positively associated families.
CheckReport check_diffusion_nonneg(const CoefficientModel& model, const CheckOptions& opts);

// nu(lower.b_i(t, ., nu)) <= mu(upper.b_i(t, ., mu)) + tol for nu <= mu with nu_i = mu_i.
CheckReport check_mean_drift_order(const ModelPair& pair, int i, const CheckOptions& opts);

// Cov_mu(b_i(t, ., mu), f) >= -tol for mu = mu_i x mu_rest and f ignoring x_i.
CheckReport check_drift_positive_association(const CoefficientModel& model, int i, const CheckOptions& opts);

// Gamma_1(f, g) = L(fg) - f Lg - g Lf with L = sum a_ij d_i d_j + b . grad,
// derivatives by central differences of step h. Orthant items are rejected.
double gamma1(const CoefficientModel& model, const TestFunction& f, const TestFunction& g, double t,
              std::span<const double> x, const EmpiricalMeasure* mu, double h = 1e-3);

// Generator form of positive-correlation preservation at mu = (mu1 + mu2) / 2:
//   2 (mu1 + mu2)(L(fg)) >= (mu1 + mu2)(Lf) (mu1 + mu2)(g) + (mu1 + mu2)(Lg) (mu1 + mu2)(f)
// after f -> f - mu(f) and g -> (g - mu1(g)) / (mu2(g) - mu1(g)) when that gap
// exceeds 1e-8. The remaining residual of mu(fg) = mu(f) mu(g) is reported.
CheckReport check_fkg_generator_inequality(const CoefficientModel& model, const EmpiricalMeasure& mu1,
                                           const EmpiricalMeasure& mu2, const TestFunction& f,
                                           const TestFunction& g, double t = 0.0, double tol = 1e-6,
                                           double h = 1e-3);

enum class Label { kYes, kNo, kUnknown };

std::string to_string(Label l);
Label parse_label(const std::string& s);

struct PropertyChecks {
    std::vector<CheckReport> sufficient;
    std::vector<CheckReport> necessary;
    Label predicted = Label::kUnknown;
};

struct StructuralResult {
    PropertyChecks order;
    PropertyChecks fkg;
    // Every distinct report in run order.
    std::vector<CheckReport> reports;
};

// "no" if a necessary check fails, else "yes" if every sufficient check
// passes, else "unknown". Order uses the pair; positive correlation uses the upper model.
StructuralResult run_structural_checks(const ModelPair& pair, const CheckOptions& opts);

}  // namespace mckv
