#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "mckv/measure.hpp"
#include "mckv/model.hpp"
#include "mckv/pushforward.hpp"
#include "mckv/wasserstein.hpp"

namespace mckv {

struct SimConfig {
    double s = 0.0;
    double T = 1.0;
    double dt = 1e-3;
    std::size_t particles = 10000;
    std::uint64_t seed = 0;
    std::size_t save_every = 100;

    // Number of Euler steps; (T - s) / dt must be an integer up to 1e-9 relative.
    std::size_t steps() const;
    // Checkpoint times: every save_every steps, plus the final time.
    std::vector<double> checkpoint_grid() const;
    void validate() const;
    nlohmann::json to_json() const;
};

struct SimResult {
    PathEnsemble ensemble;
    MeasureFlow flow;
};

// Interacting particle system: every particle steps against the
// beginning-of-step empirical cloud. The cloud size is mu0.size().
SimResult simulate_mckean_vlasov(const CoefficientModel& model, const EmpiricalMeasure& mu0, const SimConfig& cfg);

// Particles evolve independently against a frozen flow, taking at time t the
// last node of `frozen` at or before t.
PathEnsemble simulate_decoupled(const CoefficientModel& model, const MeasureFlow& frozen, const EmpiricalMeasure& mu0,
                                const SimConfig& cfg);

struct PicardOptions {
    // Negative selects lambda = 4 K e^{K (T - s)} with K from estimate_assumption_K.
    double lambda = -1.0;
    double tol = 1e-3;
    int max_iter = 20;
    std::size_t k_samples = 1000;
    W2Method method = W2Method::automatic();
    bool keep_iterates = true;
};

struct PicardTrace {
    std::vector<MeasureFlow> iterates;  // nu^1, nu^2, ... (empty unless kept)
    std::vector<double> distances;      // W_{2,lambda}(nu^k, nu^{k-1})
    double lambda = 0.0;
    double k_hat = 0.0;
    bool converged = false;
    int iterations = 0;

    nlohmann::json to_json() const;
};

struct PicardResult {
    MeasureFlow flow;
    PicardTrace trace;
};

// nu^0 is the constant flow mu0; nu^{k+1} is the law flow of
// simulate_decoupled(model, nu^k, mu0, cfg), with the same noise each time.
PicardResult picard_solve(const CoefficientModel& model, const EmpiricalMeasure& mu0, const SimConfig& cfg,
                          const PicardOptions& opts = {});

struct CouplingMode {
    // kQuantile1d: sorted pairing (d = 1, equal N). kPushforward: (x, map(x)).
    // kIdentity: pairs by particle index.
    enum class Kind { kQuantile1d, kPushforward, kIdentity };
    Kind kind = Kind::kIdentity;
    MonotoneMap map;
};

struct CoupledClouds {
    EmpiricalMeasure lower;
    EmpiricalMeasure upper;  // particle k of upper dominates particle k of lower
};

// Throws ConfigError if a produced pair is not ordered. For kPushforward, a
// non-empty mu0 must equal map # nu0 particle by particle.
CoupledClouds comonotone_coupling(const EmpiricalMeasure& nu0, const EmpiricalMeasure& mu0, const CouplingMode& mode);

struct CoupledRun {
    PathEnsemble lower;
    PathEnsemble upper;
    std::vector<double> ordered_fraction;  // per checkpoint
};

// Lower system with pair.lower and upper with pair.upper, driven by the same
// per-(particle, step) increments; each system's averages use its own cloud.
CoupledRun coupled_order_run(const ModelPair& pair, const CoupledClouds& coupling, const SimConfig& cfg);

}  // namespace mckv
