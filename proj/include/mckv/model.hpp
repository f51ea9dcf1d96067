#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mckv/expr.hpp"
#include "mckv/measure.hpp"
#include "mckv/samplers.hpp"

namespace mckv {

// Eigenvalues in [-kPdTolerance, 0) are clamped to zero; anything lower is an error.
inline constexpr double kPdTolerance = 1e-10;

// Drift b(t, x, mu) and diffusion a(t, x, mu) with the generator
// L = sum_ij a_ij d_i d_j + b . grad, so sigma = sqrt(2a).
class CoefficientModel {
public:
    CoefficientModel() = default;
    // `diffusion` is row-major d x d; empty strings mirror the other triangle.
    CoefficientModel(int dim, const std::vector<std::string>& drift, const std::vector<std::vector<std::string>>& diffusion,
                     std::string label = {});

    int dim() const noexcept { return dim_; }
    const std::string& label() const noexcept { return label_; }
    const CoeffExpr& drift(int i) const { return drift_[static_cast<std::size_t>(i)]; }
    // Entry (i, j) and (j, i) share one expression, so symmetry is exact.
    const CoeffExpr& diffusion(int i, int j) const;

    bool depends_on_measure() const noexcept;
    bool diffusion_depends_on_x() const noexcept;

    void drift_at(double t, std::span<const double> x, const EmpiricalMeasure* mu, std::span<double> out) const;
    Eigen::MatrixXd diffusion_at(double t, std::span<const double> x, const EmpiricalMeasure* mu) const;
    // sqrt(2 a(t, x, mu)); throws PdError with the point on failure.
    Eigen::MatrixXd sigma_at(double t, std::span<const double> x, const EmpiricalMeasure* mu) const;

    nlohmann::json to_json() const;
    // Stable text identity of the model (used for manifests and hashing).
    std::string canonical_text() const;

private:
    int dim_ = 0;
    std::vector<CoeffExpr> drift_;
    std::vector<CoeffExpr> upper_;  // packed upper triangle, row-major
    std::string label_;
};

struct ModelPair {
    CoefficientModel lower;  // (b-bar, a-bar)
    CoefficientModel upper;  // (b, a)

    ModelPair() = default;
    ModelPair(CoefficientModel lo, CoefficientModel up);
    static ModelPair same(const CoefficientModel& m) { return ModelPair(m, m); }
    int dim() const { return upper.dim(); }
};

// Build from {"dim", "drift": [...], "diffusion": [[...]], "label"} and
// spot-check positive definiteness at 100 points of the default sampling
// box (x in [-3,3]^d, t in [0, horizon], builtin measure families).
CoefficientModel build_model(const nlohmann::json& config, double horizon = 1.0, std::uint64_t seed = 0);

// Symmetric PSD square root of 2a via eigendecomposition.
Eigen::MatrixXd diffusion_sqrt(const Eigen::MatrixXd& a);

// Model evaluator with x-free avg terms precomputed for a fixed (t, mu). When
// the diffusion does not depend on x the square root is computed once.
class BoundModel {
public:
    BoundModel(const CoefficientModel& model, double t, const EmpiricalMeasure* mu);

    int dim() const noexcept { return model_->dim(); }
    void drift(std::span<const double> x, std::span<double> out) const;
    // Row-major d x d sigma.
    void sigma(std::span<const double> x, std::span<double> out) const;
    bool constant_sigma() const noexcept { return constant_sigma_; }

private:
    const CoefficientModel* model_;
    double t_;
    const EmpiricalMeasure* mu_;
    std::vector<std::vector<double>> drift_cache_;
    std::vector<std::vector<double>> diffusion_cache_;
    bool constant_sigma_ = false;
    std::vector<double> sigma_;
};

struct AssumptionEstimate {
    double k_hat = 0.0;
    std::size_t samples_used = 0;
    std::size_t skipped = 0;
    std::uint32_t argmax_index = 0;
};

// Sampled lower bound on the Assumption (A) constant:
//   max over samples of [2<b(t,x,mu) - b(t,y,nu), x - y> + ||sigma(t,x,mu) - sigma(t,y,nu)||_HS^2]
//                      / (|x - y|^2 + W2(mu, nu)^2),
// taken over both models of the pair and floored at 0.
AssumptionEstimate estimate_assumption_K(const ModelPair& pair, const DomainSampler& sampler, std::size_t n);

}  // namespace mckv
