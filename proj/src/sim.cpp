#include "mckv/sim.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "mckv/error.hpp"
#include "mckv/kernels.hpp"

namespace mckv {

std::size_t SimConfig::steps() const {
    const double ratio = (T - s) / dt;
    const double m = std::round(ratio);
    if (std::abs(ratio - m) > 1e-9 * std::max(1.0, m)) {
        throw ConfigError("(T - s) / dt = " + format_double(ratio) + " is not an integer step count");
    }
    return static_cast<std::size_t>(m);
}

void SimConfig::validate() const {
    if (!(std::isfinite(s) && std::isfinite(T) && s >= 0.0 && T >= s)) throw ConfigError("need T >= s >= 0");
    if (!(dt > 0.0 && std::isfinite(dt))) throw ConfigError("dt must be positive");
    if (save_every < 1) throw ConfigError("save_every must be at least 1");
    if (steps() > std::numeric_limits<std::uint32_t>::max()) throw ConfigError("too many steps");
}

std::vector<double> SimConfig::checkpoint_grid() const {
    const std::size_t m = steps();
    std::vector<double> grid;
    for (std::size_t k = 0; k <= m; k += save_every) grid.push_back(s + static_cast<double>(k) * dt);
    if (m % save_every != 0) grid.push_back(s + static_cast<double>(m) * dt);
    return grid;
}

nlohmann::json SimConfig::to_json() const {
    return {{"s", s}, {"T", T}, {"dt", dt}, {"particles", particles}, {"seed", seed}, {"save_every", save_every}};
}

namespace {

bool model_time_dependent(const CoefficientModel& m) {
    for (int i = 0; i < m.dim(); ++i) {
        if (m.drift(i).depends_on_t()) return true;
        for (int j = i; j < m.dim(); ++j) {
            if (m.diffusion(i, j).depends_on_t()) return true;
        }
    }
    return false;
}

// Steps `current` forward; `measure_at(k)` returns the cloud the drift and
// diffusion see during step k.
template <class MeasureAt>
PathEnsemble run_euler(const CoefficientModel& model, const EmpiricalMeasure& mu0, const SimConfig& cfg,
                       MeasureAt&& measure_at) {
    cfg.validate();
    if (mu0.dim() != model.dim()) throw DimensionError("initial measure dimension does not match model");
    if (mu0.empty()) throw ConfigError("initial measure is empty");
    const std::size_t m = cfg.steps();
    const std::size_t n = mu0.size();
    const auto d = static_cast<std::size_t>(model.dim());

    PathEnsemble e;
    e.grid = cfg.checkpoint_grid();
    e.paths = n;
    e.dim = model.dim();
    e.seed = cfg.seed;
    e.values.resize(n * e.grid.size() * d);
    auto save = [&](const EmpiricalMeasure& cur, std::size_t node) {
        for (std::size_t p = 0; p < n; ++p) {
            auto x = cur.particle(p);
            std::copy(x.begin(), x.end(), e.values.begin() + static_cast<std::ptrdiff_t>((p * e.grid.size() + node) * d));
        }
    };

    EmpiricalMeasure current = mu0;
    EmpiricalMeasure next = mu0;
    save(current, 0);
    std::size_t node = 1;
    const EmpiricalMeasure* bound_to = nullptr;
    double bound_t = 0.0;
    std::unique_ptr<BoundModel> bound;
    for (std::size_t k = 0; k < m; ++k) {
        const double t = cfg.s + static_cast<double>(k) * cfg.dt;
        const EmpiricalMeasure* mu = measure_at(k, t, current);
        // Frozen flows keep the same node for many steps; rebinding is only
        // needed when the measure or a time-dependent coefficient changes.
        if (!bound || mu != bound_to || mu == &current || (t != bound_t && model_time_dependent(model))) {
            bound = std::make_unique<BoundModel>(model, t, mu);
            bound_to = mu;
            bound_t = t;
        }
        kernels::euler_step({bound.get(), &current, next.mutable_values(), t, cfg.dt, cfg.seed,
                             static_cast<std::uint32_t>(k)});
        std::swap(current, next);
        if (node < e.grid.size() && ((k + 1) % cfg.save_every == 0 || k + 1 == m)) save(current, node++);
    }
    return e;
}

}  // namespace

SimResult simulate_mckean_vlasov(const CoefficientModel& model, const EmpiricalMeasure& mu0, const SimConfig& cfg) {
    if (model.depends_on_measure() && mu0.size() < 2) {
        throw ConfigError("mean-field models need at least 2 particles");
    }
    SimResult r;
    r.ensemble = run_euler(model, mu0, cfg,
                           [](std::size_t, double, const EmpiricalMeasure& current) { return &current; });
    r.flow = r.ensemble.flow();
    return r;
}

PathEnsemble simulate_decoupled(const CoefficientModel& model, const MeasureFlow& frozen, const EmpiricalMeasure& mu0,
                                const SimConfig& cfg) {
    frozen.validate();
    if (frozen.dim() != model.dim()) throw DimensionError("frozen flow dimension does not match model");
    cfg.validate();
    if (frozen.grid.front() > cfg.s + 1e-9 || frozen.grid.back() < cfg.T - cfg.dt - 1e-9) {
        throw ConfigError("frozen flow does not cover [s, T]");
    }
    return run_euler(model, mu0, cfg, [&](std::size_t, double t, const EmpiricalMeasure&) {
        return &frozen.nodes[frozen.node_at_or_before(t)];
    });
}

nlohmann::json PicardTrace::to_json() const {
    nlohmann::json ratios = nlohmann::json::array();
    for (std::size_t k = 1; k < distances.size(); ++k) {
        ratios.push_back(distances[k - 1] > 0.0 ? nlohmann::json(distances[k] / distances[k - 1]) : nlohmann::json(nullptr));
    }
    return {{"lambda", lambda}, {"k_hat", k_hat},       {"converged", converged},
            {"iterations", iterations}, {"distances", distances}, {"ratios", ratios}};
}

PicardResult picard_solve(const CoefficientModel& model, const EmpiricalMeasure& mu0, const SimConfig& cfg,
                          const PicardOptions& opts) {
    cfg.validate();
    if (!(opts.tol > 0.0)) throw ConfigError("picard tolerance must be positive");
    if (opts.max_iter < 1) throw ConfigError("picard max_iter must be at least 1");
    PicardResult r;
    PicardTrace& tr = r.trace;
    if (opts.lambda < 0.0) {
        DomainSampler sampler;
        sampler.box.t_lo = cfg.s;
        sampler.box.t_hi = cfg.T;
        sampler.seed = cfg.seed;
        tr.k_hat = estimate_assumption_K(ModelPair::same(model), sampler, opts.k_samples).k_hat;
        tr.lambda = 4.0 * tr.k_hat * std::exp(tr.k_hat * (cfg.T - cfg.s));
    } else {
        tr.lambda = opts.lambda;
    }
    MeasureFlow prev = constant_flow(mu0, cfg.checkpoint_grid());
    for (int it = 1; it <= opts.max_iter; ++it) {
        MeasureFlow next = simulate_decoupled(model, prev, mu0, cfg).flow();
        const double dist = w2_lambda(next, prev, tr.lambda, opts.method);
        tr.distances.push_back(dist);
        tr.iterations = it;
        if (opts.keep_iterates) tr.iterates.push_back(next);
        prev = std::move(next);
        if (dist <= opts.tol) {
            tr.converged = true;
            break;
        }
    }
    r.flow = std::move(prev);
    return r;
}

CoupledClouds comonotone_coupling(const EmpiricalMeasure& nu0, const EmpiricalMeasure& mu0, const CouplingMode& mode) {
    CoupledClouds c;
    switch (mode.kind) {
        case CouplingMode::Kind::kQuantile1d: {
            if (nu0.dim() != 1 || mu0.dim() != 1) throw ConfigError("quantile coupling needs d = 1");
            if (nu0.size() != mu0.size()) throw ConfigError("quantile coupling needs equal particle counts");
            std::vector<double> a(nu0.values().begin(), nu0.values().end());
            std::vector<double> b(mu0.values().begin(), mu0.values().end());
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            c.lower = EmpiricalMeasure(1, std::move(a));
            c.upper = EmpiricalMeasure(1, std::move(b));
            break;
        }
        case CouplingMode::Kind::kPushforward: {
            c.lower = nu0;
            c.upper = increasing_pushforward(nu0, mode.map, true);
            if (!mu0.empty() && !(mu0 == c.upper)) throw ConfigError("pushforward coupling: mu0 is not map # nu0");
            break;
        }
        case CouplingMode::Kind::kIdentity: {
            if (nu0.dim() != mu0.dim() || nu0.size() != mu0.size()) {
                throw ConfigError("identity coupling needs equal dimension and particle count");
            }
            c.lower = nu0;
            c.upper = mu0;
            break;
        }
    }
    for (std::size_t p = 0; p < c.lower.size(); ++p) {
        auto x = c.lower.particle(p);
        auto y = c.upper.particle(p);
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] > y[i]) {
                throw ConfigError("coupling pair " + std::to_string(p) + " is not ordered at coordinate " +
                                  std::to_string(i + 1));
            }
        }
    }
    return c;
}

CoupledRun coupled_order_run(const ModelPair& pair, const CoupledClouds& coupling, const SimConfig& cfg) {
    if (coupling.lower.dim() != pair.dim() || coupling.upper.dim() != pair.dim()) {
        throw DimensionError("coupling dimension does not match model pair");
    }
    if (coupling.lower.size() != coupling.upper.size()) throw ConfigError("coupled clouds differ in size");
    CoupledRun run;
    run.lower = simulate_mckean_vlasov(pair.lower, coupling.lower, cfg).ensemble;
    run.upper = simulate_mckean_vlasov(pair.upper, coupling.upper, cfg).ensemble;
    const std::size_t n = run.lower.paths;
    for (std::size_t node = 0; node < run.lower.nodes(); ++node) {
        std::size_t ordered = 0;
        for (std::size_t p = 0; p < n; ++p) {
            bool ok = true;
            for (int i = 0; i < pair.dim() && ok; ++i) ok = run.lower.at(p, node, i) <= run.upper.at(p, node, i);
            ordered += ok ? 1 : 0;
        }
        run.ordered_fraction.push_back(static_cast<double>(ordered) / static_cast<double>(n));
    }
    return run;
}

}  // namespace mckv
