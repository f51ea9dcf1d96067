#include "mckv/checker.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>

#include "kernels_detail.hpp"
#include "mckv/error.hpp"
#include "mckv/rng.hpp"

namespace mckv {

std::string to_string(CheckVerdict v) { return v == CheckVerdict::kPass ? "PASS" : "FAIL"; }

std::string to_string(LocalityScope s) {
    switch (s) {
        case LocalityScope::kAll: return "all";
        case LocalityScope::kPositive: return "positive";
        case LocalityScope::kDelta: return "delta";
    }
    return "?";
}

std::string to_string(Label l) {
    switch (l) {
        case Label::kYes: return "yes";
        case Label::kNo: return "no";
        case Label::kUnknown: return "unknown";
    }
    return "?";
}

Label parse_label(const std::string& s) {
    if (s == "yes") return Label::kYes;
    if (s == "no") return Label::kNo;
    if (s == "unknown") return Label::kUnknown;
    throw ConfigError("label must be yes, no or unknown, got '" + s + "'");
}

nlohmann::json CheckReport::to_json() const {
    return {{"id", id},
            {"verdict", to_string(verdict)},
            {"witness", witness},
            {"tolerance", tolerance},
            {"samples", samples_used},
            {"seed", seed},
            {"worst_excess", std::isfinite(worst_excess) ? nlohmann::json(worst_excess) : nlohmann::json(nullptr)}};
}

namespace {

struct SampleResult {
    double excess = -std::numeric_limits<double>::infinity();
    nlohmann::json witness;  // filled only when excess > tol
};

nlohmann::json vec_json(std::span<const double> v) { return std::vector<double>(v.begin(), v.end()); }

nlohmann::json measure_summary(const EmpiricalMeasure& m) { return {{"size", m.size()}, {"mean", m.mean()}}; }

void validate(const CheckOptions& o) {
    if (o.n < 1) throw ConfigError("check sample count must be at least 1");
    if (!(o.tol >= 0.0)) throw ConfigError("check tolerance must be nonnegative");
    if (o.particles < 1) throw ConfigError("check particle count must be positive");
}

void validate_coord(int i, int dim, const char* what) {
    if (i < 0 || i >= dim) throw DimensionError(std::string(what) + ": coordinate out of range");
}

// Runs fn over sample indices in chunks; the first violating index (in index
// order) decides the witness, independent of scheduling.
CheckReport run_sampled(std::string id, const CheckOptions& opts, const std::function<SampleResult(std::uint32_t)>& fn) {
    validate(opts);
    CheckReport rep;
    rep.id = std::move(id);
    rep.tolerance = opts.tol;
    rep.seed = opts.seed;
    rep.worst_excess = -std::numeric_limits<double>::infinity();
    constexpr std::size_t kChunk = 256;
    std::vector<SampleResult> results(kChunk);
    for (std::size_t start = 0; start < opts.n; start += kChunk) {
        const std::size_t count = std::min(kChunk, opts.n - start);
        kernels::detail::FirstError first;
#pragma omp parallel
        {
            kernels::detail::FirstError local;
#pragma omp for schedule(static)
            for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(count); ++q) {
                const std::size_t k = start + static_cast<std::size_t>(q);
                try {
                    results[static_cast<std::size_t>(q)] = fn(static_cast<std::uint32_t>(k));
                } catch (const Error& e) {
                    local.record(k, std::make_exception_ptr(NumericalError(rep.id + ", sample " + std::to_string(k) +
                                                                           ": " + e.what())));
                } catch (...) {
                    local.record(k, std::current_exception());
                }
            }
#pragma omp critical(mckv_check_error)
            first.merge(local);
        }
        first.rethrow();
        for (std::size_t q = 0; q < count; ++q) {
            rep.worst_excess = std::max(rep.worst_excess, results[q].excess);
            if (results[q].excess > opts.tol) {
                rep.verdict = CheckVerdict::kFail;
                rep.witness = std::move(results[q].witness);
                rep.witness["sample"] = start + q;
                rep.samples_used = start + q + 1;
                return rep;
            }
        }
        rep.samples_used = start + count;
    }
    return rep;
}

MeasurePairSampler pair_sampler(const CheckOptions& o, PairingMode mode, int fixed_i = -1) {
    MeasurePairSampler s;
    s.mode = mode;
    s.fixed_i = fixed_i;
    s.particles = o.particles;
    s.seed = o.seed;
    return s;
}

DomainSampler domain_sampler(const CheckOptions& o, std::vector<MeasureFamily> families) {
    DomainSampler s;
    s.box = o.box;
    s.families = std::move(families);
    s.particles = o.particles;
    s.seed = o.seed;
    return s;
}

double mean_of_drift(const CoefficientModel& m, int i, double t, const EmpiricalMeasure& mu) {
    const BoundModel bound(m, t, &mu);
    std::vector<double> b(static_cast<std::size_t>(m.dim()));
    double s = 0.0;
    for (std::size_t p = 0; p < mu.size(); ++p) {
        bound.drift(mu.particle(p), b);
        s += b[static_cast<std::size_t>(i)];
    }
    return s / static_cast<double>(mu.size());
}

using Scalar = std::function<double(std::span<const double>)>;

// L phi(x) = sum_ij a_ij d_i d_j phi + b . grad phi by central differences.
double apply_generator(const Eigen::MatrixXd& a, std::span<const double> b, std::span<const double> x,
                       const Scalar& phi, double h) {
    const auto d = x.size();
    std::vector<double> y(x.begin(), x.end());
    const double f0 = phi(x);
    auto at = [&](std::size_t i, double di, std::size_t j, double dj) {
        y[i] += di;
        y[j] += dj;
        const double v = phi(y);
        y[i] = x[i];
        y[j] = x[j];
        return v;
    };
    double out = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double fp = at(i, h, i, 0.0);
        const double fm = at(i, -h, i, 0.0);
        out += b[i] * (fp - fm) / (2.0 * h);
        out += a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) * (fp - 2.0 * f0 + fm) / (h * h);
        for (std::size_t j = i + 1; j < d; ++j) {
            const double aij = a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (aij == 0.0) continue;
            const double mixed = (at(i, h, j, h) - at(i, h, j, -h) - at(i, -h, j, h) + at(i, -h, j, -h)) / (4.0 * h * h);
            out += 2.0 * aij * mixed;
        }
    }
    return out;
}

void require_differentiable(const TestFunction& f) {
    if (!f.differentiable()) throw ConfigError("gamma1 needs differentiable test functions, got " + f.describe());
}

}  // namespace

CheckReport check_drift_comparison(const ModelPair& pair, int i, const CheckOptions& opts) {
    const int d = pair.dim();
    validate_coord(i, d, "check_drift_comparison");
    const auto sampler = pair_sampler(opts, PairingMode::kOrdered);
    return run_sampled("drift_comparison[i=" + std::to_string(i + 1) + "]", opts, [&](std::uint32_t k) {
        const MeasurePair mp = sampler.sample(d, k);
        PhiloxStream rng(opts.seed, StreamTag::kSampler, k, 2);
        const double t = rng.uniform(opts.box.t_lo, opts.box.t_hi);
        std::vector<double> x(static_cast<std::size_t>(d)), y(static_cast<std::size_t>(d));
        for (auto& v : x) v = rng.uniform(opts.box.x_lo, opts.box.x_hi);
        for (int j = 0; j < d; ++j) {
            const double bump = rng.uniform() < 0.25 ? 0.0 : rng.uniform(0.0, 2.0);
            y[static_cast<std::size_t>(j)] = x[static_cast<std::size_t>(j)] + (j == i ? 0.0 : bump);
        }
        const double lhs = pair.lower.drift(i).eval(t, x, &mp.lower);
        const double rhs = pair.upper.drift(i).eval(t, y, &mp.upper);
        SampleResult r{lhs - rhs, {}};
        if (r.excess > opts.tol) {
            r.witness = {{"t", t},   {"x", x},     {"y", y}, {"nu", measure_summary(mp.lower)},
                         {"mu", measure_summary(mp.upper)}, {"lhs", lhs}, {"rhs", rhs}};
        }
        return r;
    });
}

CheckReport check_diffusion_locality(const CoefficientModel& model, int i, int j, LocalityScope scope,
                                     const CheckOptions& opts) {
    const int d = model.dim();
    validate_coord(i, d, "check_diffusion_locality");
    validate_coord(j, d, "check_diffusion_locality");
    std::vector<int> outside;
    for (int k = 0; k < d; ++k) {
        if (k != i && k != j) outside.push_back(k);
    }
    std::vector<MeasureFamily> families = scope == LocalityScope::kAll        ? all_families()
                                          : scope == LocalityScope::kPositive ? positive_families()
                                                                              : std::vector{MeasureFamily::kDelta};
    const auto sampler = domain_sampler(opts, families);
    const std::string id = "diffusion_locality[" + to_string(scope) + "][i=" + std::to_string(i + 1) +
                           ",j=" + std::to_string(j + 1) + "]";
    if (outside.empty()) {
        CheckReport rep;
        rep.id = id;
        rep.tolerance = opts.tol;
        rep.seed = opts.seed;
        return rep;
    }
    return run_sampled(id, opts, [&](std::uint32_t k) {
        const DomainSample s = sampler.sample(d, k);
        const double base = model.diffusion(i, j).eval(s.t, s.x, &s.mu);
        PhiloxStream rng(opts.seed, StreamTag::kSampler, k, 3);
        SampleResult r;
        std::vector<double> xp = s.x;
        for (int rep = 0; rep < 8; ++rep) {
            xp = s.x;
            for (int c : outside) xp[static_cast<std::size_t>(c)] += rng.uniform(-2.0, 2.0);
            const double moved = model.diffusion(i, j).eval(s.t, xp, &s.mu);
            const double excess = std::abs(moved - base);
            if (excess > r.excess) {
                r.excess = excess;
                if (excess > opts.tol) {
                    r.witness = {{"t", s.t},        {"x", s.x},         {"x_perturbed", xp},
                                 {"i", i + 1},      {"j", j + 1},       {"mu", measure_summary(s.mu)},
                                 {"a_ij_x", base},  {"a_ij_x_perturbed", moved}};
                    break;
                }
            }
        }
        return r;
    });
}

CheckReport check_diffusion_locality(const CoefficientModel& model, LocalityScope scope, const CheckOptions& opts) {
    CheckReport all;
    all.id = "diffusion_locality[" + to_string(scope) + "]";
    all.tolerance = opts.tol;
    all.seed = opts.seed;
    all.worst_excess = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < model.dim(); ++i) {
        for (int j = i; j < model.dim(); ++j) {
            CheckReport r = check_diffusion_locality(model, i, j, scope, opts);
            all.samples_used = std::max(all.samples_used, r.samples_used);
            all.worst_excess = std::max(all.worst_excess, r.worst_excess);
            if (!r.passed()) {
                all.verdict = CheckVerdict::kFail;
                all.witness = std::move(r.witness);
                all.samples_used = r.samples_used;
                return all;
            }
        }
    }
    return all;
}

CheckReport check_diffusion_equality(const ModelPair& pair, const CheckOptions& opts) {
    const int d = pair.dim();
    const auto sampler = domain_sampler(opts, all_families());
    return run_sampled("diffusion_equality", opts, [&](std::uint32_t k) {
        const DomainSample s = sampler.sample(d, k);
        const Eigen::MatrixXd a = pair.upper.diffusion_at(s.t, s.x, &s.mu);
        const Eigen::MatrixXd abar = pair.lower.diffusion_at(s.t, s.x, &s.mu);
        SampleResult r{(a - abar).cwiseAbs().maxCoeff(), {}};
        if (r.excess > opts.tol) {
            std::vector<double> av(a.data(), a.data() + a.size()), bv(abar.data(), abar.data() + abar.size());
            r.witness = {{"t", s.t}, {"x", s.x}, {"mu", measure_summary(s.mu)}, {"a", av}, {"a_bar", bv}};
        }
        return r;
    });
}

CheckReport check_diffusion_nonneg(const CoefficientModel& model, const CheckOptions& opts) {
    const int d = model.dim();
    const auto sampler = domain_sampler(opts, positive_families());
    return run_sampled("diffusion_nonneg", opts, [&](std::uint32_t k) {
        const DomainSample s = sampler.sample(d, k);
        const Eigen::MatrixXd a = model.diffusion_at(s.t, s.x, &s.mu);
        Eigen::Index ri = 0, ci = 0;
        const double lowest = a.minCoeff(&ri, &ci);
        SampleResult r{-lowest, {}};
        if (r.excess > opts.tol) {
            r.witness = {{"t", s.t},
                         {"x", s.x},
                         {"mu", measure_summary(s.mu)},
                         {"i", std::min(ri, ci) + 1},
                         {"j", std::max(ri, ci) + 1},
                         {"a_ij", lowest}};
        }
        return r;
    });
}

CheckReport check_mean_drift_order(const ModelPair& pair, int i, const CheckOptions& opts) {
    const int d = pair.dim();
    validate_coord(i, d, "check_mean_drift_order");
    const auto sampler = pair_sampler(opts, PairingMode::kOrderedFixing, i);
    return run_sampled("mean_drift_order[i=" + std::to_string(i + 1) + "]", opts, [&](std::uint32_t k) {
        const MeasurePair mp = sampler.sample(d, k);
        PhiloxStream rng(opts.seed, StreamTag::kSampler, k, 2);
        const double t = rng.uniform(opts.box.t_lo, opts.box.t_hi);
        const double lhs = mean_of_drift(pair.lower, i, t, mp.lower);
        const double rhs = mean_of_drift(pair.upper, i, t, mp.upper);
        SampleResult r{lhs - rhs, {}};
        if (r.excess > opts.tol) {
            r.witness = {{"t", t},      {"nu", measure_summary(mp.lower)}, {"mu", measure_summary(mp.upper)},
                         {"lhs", lhs},  {"rhs", rhs}};
        }
        return r;
    });
}

CheckReport check_drift_positive_association(const CoefficientModel& model, int i, const CheckOptions& opts) {
    const int d = model.dim();
    validate_coord(i, d, "check_drift_positive_association");
    FamilySpec spec = fkg_family_defaults(opts.seed);
    spec.ignore = {i};
    const TestFunctionFamily family = make_increasing_family(d, spec);
    return run_sampled("drift_positive_association[i=" + std::to_string(i + 1) + "]", opts, [&](std::uint32_t k) {
        PhiloxStream rng(opts.seed, StreamTag::kSampler, k, 4);
        const double t = rng.uniform(opts.box.t_lo, opts.box.t_hi);
        const EmpiricalMeasure mu = draw_split_product_measure(d, i, opts.particles, rng);
        const BoundModel bound(model, t, &mu);
        const std::size_t n = mu.size();
        std::vector<double> b(n), scratch(static_cast<std::size_t>(d));
        double bmean = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            bound.drift(mu.particle(p), scratch);
            b[p] = scratch[static_cast<std::size_t>(i)];
            bmean += b[p];
        }
        bmean /= static_cast<double>(n);
        SampleResult r;
        std::vector<double> fv(n);
        for (std::size_t q = 0; q < family.size(); ++q) {
            double fmean = 0.0;
            for (std::size_t p = 0; p < n; ++p) {
                fv[p] = family.items[q](mu.particle(p));
                fmean += fv[p];
            }
            fmean /= static_cast<double>(n);
            double cov = 0.0;
            for (std::size_t p = 0; p < n; ++p) cov += (b[p] - bmean) * (fv[p] - fmean);
            cov /= static_cast<double>(n);
            if (-cov > r.excess) {
                r.excess = -cov;
                if (r.excess > opts.tol) {
                    r.witness = {{"t", t}, {"mu", measure_summary(mu)}, {"f", family.items[q].describe()}, {"cov", cov}};
                    break;
                }
            }
        }
        return r;
    });
}

double gamma1(const CoefficientModel& model, const TestFunction& f, const TestFunction& g, double t,
              std::span<const double> x, const EmpiricalMeasure* mu, double h) {
    require_differentiable(f);
    require_differentiable(g);
    if (static_cast<int>(x.size()) != model.dim() || f.active.size() != x.size() || g.active.size() != x.size()) {
        throw DimensionError("gamma1: dimension mismatch");
    }
    if (!(h > 0.0)) throw ConfigError("gamma1: step must be positive");
    const Eigen::MatrixXd a = model.diffusion_at(t, x, mu);
    std::vector<double> b(x.size());
    model.drift_at(t, x, mu, b);
    const Scalar fs = [&](std::span<const double> y) { return f(y); };
    const Scalar gs = [&](std::span<const double> y) { return g(y); };
    const Scalar fg = [&](std::span<const double> y) { return f(y) * g(y); };
    return apply_generator(a, b, x, fg, h) - f(x) * apply_generator(a, b, x, gs, h) -
           g(x) * apply_generator(a, b, x, fs, h);
}

CheckReport check_fkg_generator_inequality(const CoefficientModel& model, const EmpiricalMeasure& mu1,
                                           const EmpiricalMeasure& mu2, const TestFunction& f,
                                           const TestFunction& g, double t, double tol, double h) {
    require_differentiable(f);
    require_differentiable(g);
    if (mu1.dim() != model.dim() || mu2.dim() != model.dim()) throw DimensionError("fkg generator check: dimension mismatch");
    if (mu1.empty() || mu2.empty()) throw ConfigError("fkg generator check: empty measure");
    const EmpiricalMeasure mix = mixture(mu1, mu2);

    auto mean_over = [](const EmpiricalMeasure& m, const Scalar& phi) {
        double s = 0.0;
        for (std::size_t p = 0; p < m.size(); ++p) s += phi(m.particle(p));
        return s / static_cast<double>(m.size());
    };
    const Scalar fs = [&](std::span<const double> y) { return f(y); };
    const Scalar gs = [&](std::span<const double> y) { return g(y); };
    const double f_shift = 0.5 * (mean_over(mu1, fs) + mean_over(mu2, fs));
    const double g1 = mean_over(mu1, gs);
    const double gap = mean_over(mu2, gs) - g1;
    const bool rescale = std::abs(gap) > 1e-8;
    const Scalar F = [&](std::span<const double> y) { return f(y) - f_shift; };
    const Scalar G = [&](std::span<const double> y) { return rescale ? (g(y) - g1) / gap : g(y); };
    const Scalar FG = [&](std::span<const double> y) { return F(y) * G(y); };

    struct Sums {
        double l_fg = 0.0, l_f = 0.0, l_g = 0.0, f = 0.0, g = 0.0;
    };
    auto sums_over = [&](const EmpiricalMeasure& m) {
        Sums s;
        std::vector<double> b(static_cast<std::size_t>(model.dim()));
        for (std::size_t p = 0; p < m.size(); ++p) {
            auto x = m.particle(p);
            const Eigen::MatrixXd a = model.diffusion_at(t, x, &mix);
            model.drift_at(t, x, &mix, b);
            s.l_fg += apply_generator(a, b, x, FG, h);
            s.l_f += apply_generator(a, b, x, F, h);
            s.l_g += apply_generator(a, b, x, G, h);
            s.f += F(x);
            s.g += G(x);
        }
        const double n = static_cast<double>(m.size());
        return Sums{s.l_fg / n, s.l_f / n, s.l_g / n, s.f / n, s.g / n};
    };
    const Sums s1 = sums_over(mu1);
    const Sums s2 = sums_over(mu2);
    const double lhs = 2.0 * (s1.l_fg + s2.l_fg);
    const double rhs = (s1.l_f + s2.l_f) * (s1.g + s2.g) + (s1.l_g + s2.l_g) * (s1.f + s2.f);
    const double residual = mean_over(mix, FG) - mean_over(mix, F) * mean_over(mix, G);

    CheckReport rep;
    rep.id = "fkg_generator_inequality";
    rep.tolerance = tol;
    rep.samples_used = 1;
    rep.worst_excess = rhs - lhs;
    if (rhs - lhs > tol) {
        rep.verdict = CheckVerdict::kFail;
        rep.witness = {{"t", t},          {"f", f.describe()}, {"g", g.describe()},
                       {"lhs", lhs},      {"rhs", rhs},        {"precondition_residual", residual},
                       {"g_rescaled", rescale}};
    }
    return rep;
}

StructuralResult run_structural_checks(const ModelPair& pair, const CheckOptions& opts) {
    StructuralResult out;
    std::map<std::string, std::size_t> index;
    auto keep = [&](const std::string& key, const std::function<CheckReport()>& run) -> const CheckReport& {
        auto it = index.find(key);
        if (it == index.end()) {
            CheckReport r = run();
            r.id = key;
            it = index.emplace(key, out.reports.size()).first;
            out.reports.push_back(std::move(r));
        }
        return out.reports[it->second];
    };
    const int d = pair.dim();
    const CoefficientModel& m = pair.upper;
    const ModelPair self = ModelPair::same(m);
    const auto suffix = [](int i) { return "[i=" + std::to_string(i + 1) + "]"; };

    for (int i = 0; i < d; ++i) {
        out.order.sufficient.push_back(
            keep("order.drift_comparison" + suffix(i), [&] { return check_drift_comparison(pair, i, opts); }));
    }
    const auto equality = [&] { return check_diffusion_equality(pair, opts); };
    out.order.sufficient.push_back(keep("diffusion_equality", equality));
    out.order.sufficient.push_back(keep("diffusion_locality[all]", [&] {
        return check_diffusion_locality(m, LocalityScope::kAll, opts);
    }));
    for (int i = 0; i < d; ++i) {
        out.order.necessary.push_back(
            keep("order.mean_drift_order" + suffix(i), [&] { return check_mean_drift_order(pair, i, opts); }));
    }
    out.order.necessary.push_back(keep("diffusion_equality", equality));
    out.order.necessary.push_back(keep("diffusion_locality[delta]", [&] {
        return check_diffusion_locality(m, LocalityScope::kDelta, opts);
    }));

    for (int i = 0; i < d; ++i) {
        out.fkg.sufficient.push_back(
            keep("fkg.drift_comparison" + suffix(i), [&] { return check_drift_comparison(self, i, opts); }));
    }
    const auto nonneg = [&] { return check_diffusion_nonneg(m, opts); };
    const auto positive_locality = [&] { return check_diffusion_locality(m, LocalityScope::kPositive, opts); };
    out.fkg.sufficient.push_back(keep("diffusion_nonneg", nonneg));
    out.fkg.sufficient.push_back(keep("diffusion_locality[positive]", positive_locality));
    for (int i = 0; i < d; ++i) {
        out.fkg.necessary.push_back(keep("fkg.drift_positive_association" + suffix(i),
                                         [&] { return check_drift_positive_association(m, i, opts); }));
    }
    out.fkg.necessary.push_back(keep("diffusion_nonneg", nonneg));
    out.fkg.necessary.push_back(keep("diffusion_locality[positive]", positive_locality));

    for (PropertyChecks* pc : {&out.order, &out.fkg}) {
        const auto ok = [](const CheckReport& r) { return r.passed(); };
        if (!std::all_of(pc->necessary.begin(), pc->necessary.end(), ok)) {
            pc->predicted = Label::kNo;
        } else if (std::all_of(pc->sufficient.begin(), pc->sufficient.end(), ok)) {
            pc->predicted = Label::kYes;
        } else {
            pc->predicted = Label::kUnknown;
        }
    }
    return out;
}

}  // namespace mckv
