#include "mckv/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "mckv/error.hpp"
#include "mckv/rng.hpp"

namespace mckv {

namespace {

void check_keys(const nlohmann::json& j, const char* where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) {
        if (!ok.count(key)) throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
    }
}

std::vector<double> real_vector(const nlohmann::json& j, std::size_t n, const char* what) {
    if (!j.is_array() || j.size() != n) {
        throw ConfigError(std::string(what) + " must be an array of " + std::to_string(n) + " numbers");
    }
    std::vector<double> v;
    for (const auto& x : j) {
        if (!x.is_number()) throw ConfigError(std::string(what) + " must contain numbers");
        v.push_back(x.get<double>());
    }
    return v;
}

InitialSpec::Kind parse_initial_kind(const std::string& k) {
    if (k == "delta") return InitialSpec::Kind::kDelta;
    if (k == "gaussian") return InitialSpec::Kind::kGaussian;
    if (k == "uniform") return InitialSpec::Kind::kUniform;
    if (k == "csv") return InitialSpec::Kind::kCsv;
    if (k == "shift") return InitialSpec::Kind::kShift;
    throw ConfigError("unknown initial kind '" + k + "'");
}

Label label_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) return Label::kUnknown;
    if (!j.at(key).is_string()) throw ConfigError(std::string("ground_truth.") + key + " must be a string");
    return parse_label(j.at(key).get<std::string>());
}

}  // namespace

InitialSpec InitialSpec::from_json(const nlohmann::json& j, int dim, const std::string& base_dir) {
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
        throw ConfigError("initial measure needs a string 'kind'");
    }
    InitialSpec s;
    s.kind = parse_initial_kind(j.at("kind").get<std::string>());
    const auto d = static_cast<std::size_t>(dim);
    switch (s.kind) {
        case Kind::kDelta:
            check_keys(j, "initial", {"kind", "point"});
            s.point = real_vector(j.at("point"), d, "initial.point");
            break;
        case Kind::kGaussian: {
            check_keys(j, "initial", {"kind", "mean", "covariance"});
            s.point = real_vector(j.at("mean"), d, "initial.mean");
            const auto& c = j.at("covariance");
            if (!c.is_array() || c.size() != d) throw ConfigError("initial.covariance must be d x d");
            for (const auto& row : c) s.covariance.push_back(real_vector(row, d, "initial.covariance row"));
            for (std::size_t a = 0; a < d; ++a) {
                for (std::size_t b = 0; b < d; ++b) {
                    if (s.covariance[a][b] != s.covariance[b][a]) throw ConfigError("initial.covariance must be symmetric");
                }
            }
            break;
        }
        case Kind::kUniform:
            check_keys(j, "initial", {"kind", "lo", "hi"});
            s.lo = real_vector(j.at("lo"), d, "initial.lo");
            s.hi = real_vector(j.at("hi"), d, "initial.hi");
            for (std::size_t i = 0; i < d; ++i) {
                if (!(s.lo[i] <= s.hi[i])) throw ConfigError("initial: need lo <= hi");
            }
            break;
        case Kind::kCsv: {
            check_keys(j, "initial", {"kind", "path"});
            s.path = j.at("path").get<std::string>();
            const std::filesystem::path p(s.path);
            s.resolved_path = p.is_absolute() ? s.path : (std::filesystem::path(base_dir) / p).string();
            if (!std::filesystem::exists(s.resolved_path)) throw ConfigError("initial csv not found: " + s.path);
            break;
        }
        case Kind::kShift:
            check_keys(j, "initial", {"kind", "offset"});
            s.point = real_vector(j.at("offset"), d, "initial.offset");
            for (double v : s.point) {
                if (v < 0.0) throw ConfigError("initial shift offsets must be nonnegative");
            }
            break;
    }
    return s;
}

nlohmann::json InitialSpec::to_json() const {
    switch (kind) {
        case Kind::kDelta: return {{"kind", "delta"}, {"point", point}};
        case Kind::kGaussian: return {{"kind", "gaussian"}, {"mean", point}, {"covariance", covariance}};
        case Kind::kUniform: return {{"kind", "uniform"}, {"lo", lo}, {"hi", hi}};
        case Kind::kCsv: return {{"kind", "csv"}, {"path", path}};
        case Kind::kShift: return {{"kind", "shift"}, {"offset", point}};
    }
    return nullptr;
}

EmpiricalMeasure sample_initial(const InitialSpec& spec, int dim, std::size_t n, std::uint64_t seed,
                                std::uint32_t system) {
    if (n < 1) throw ConfigError("particle count must be positive");
    const auto d = static_cast<std::size_t>(dim);
    std::vector<double> v(n * d);
    switch (spec.kind) {
        case InitialSpec::Kind::kDelta:
            for (std::size_t p = 0; p < n; ++p) std::copy(spec.point.begin(), spec.point.end(), v.begin() + static_cast<std::ptrdiff_t>(p * d));
            break;
        case InitialSpec::Kind::kGaussian: {
            Eigen::MatrixXd cov(dim, dim);
            for (int a = 0; a < dim; ++a) {
                for (int b = 0; b < dim; ++b) cov(a, b) = spec.covariance[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            }
            // sqrt(2 * cov / 2) is the symmetric root of the covariance.
            const Eigen::MatrixXd root = diffusion_sqrt(0.5 * cov);
            std::vector<double> z(d);
            for (std::size_t p = 0; p < n; ++p) {
                PhiloxStream rng(seed, StreamTag::kInitial, static_cast<std::uint32_t>(p), system);
                for (auto& x : z) x = rng.normal();
                for (std::size_t i = 0; i < d; ++i) {
                    double s = spec.point[i];
                    for (std::size_t k = 0; k < d; ++k) s += root(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * z[k];
                    v[p * d + i] = s;
                }
            }
            break;
        }
        case InitialSpec::Kind::kUniform:
            for (std::size_t p = 0; p < n; ++p) {
                PhiloxStream rng(seed, StreamTag::kInitial, static_cast<std::uint32_t>(p), system);
                for (std::size_t i = 0; i < d; ++i) v[p * d + i] = rng.uniform(spec.lo[i], spec.hi[i]);
            }
            break;
        case InitialSpec::Kind::kCsv: {
            std::ifstream in(spec.resolved_path);
            if (!in) throw ConfigError("cannot open " + spec.resolved_path);
            EmpiricalMeasure m = read_points_csv(in);
            if (m.dim() != dim) throw ConfigError("initial csv has dimension " + std::to_string(m.dim()));
            if (m.size() != n) m = resample(m, n, seed ^ (0x9E3779B97F4A7C15ull * (system + 1)));
            return m;
        }
        case InitialSpec::Kind::kShift:
            throw ConfigError("a shift initial needs a lower initial to shift");
    }
    return EmpiricalMeasure(dim, std::move(v));
}

Battery Battery::from_json(const nlohmann::json& j) {
    Battery b;
    if (j.is_null()) return b;
    check_keys(j, "battery",
               {"checks", "simulate", "tests", "path_tests", "picard", "check_samples", "check_particles", "tolerance",
                "alpha", "n_boot", "ordered_fraction_min", "picard_options"});
    b.checks = j.value("checks", b.checks);
    b.simulate = j.value("simulate", b.simulate);
    b.tests = j.value("tests", b.tests);
    b.path_tests = j.value("path_tests", b.path_tests);
    b.picard = j.value("picard", b.picard);
    b.check_samples = j.value("check_samples", b.check_samples);
    b.check_particles = j.value("check_particles", b.check_particles);
    b.tolerance = j.value("tolerance", b.tolerance);
    b.alpha = j.value("alpha", b.alpha);
    b.n_boot = j.value("n_boot", b.n_boot);
    b.ordered_fraction_min = j.value("ordered_fraction_min", b.ordered_fraction_min);
    if (j.contains("picard_options")) {
        const auto& p = j.at("picard_options");
        check_keys(p, "battery.picard_options", {"lambda", "tol", "max_iter", "k_samples"});
        if (p.contains("lambda")) {
            const auto& l = p.at("lambda");
            if (l.is_string()) {
                if (l.get<std::string>() != "auto") throw ConfigError("picard lambda must be a number or \"auto\"");
                b.picard_options.lambda = -1.0;
            } else {
                b.picard_options.lambda = l.get<double>();
                if (b.picard_options.lambda < 0.0) throw ConfigError("picard lambda must be nonnegative");
            }
        }
        b.picard_options.tol = p.value("tol", b.picard_options.tol);
        b.picard_options.max_iter = p.value("max_iter", b.picard_options.max_iter);
        b.picard_options.k_samples = p.value("k_samples", b.picard_options.k_samples);
    }
    if (b.check_samples < 1) throw ConfigError("battery.check_samples must be positive");
    if (!(b.alpha > 0.0 && b.alpha < 1.0)) throw ConfigError("battery.alpha must lie in (0, 1)");
    if (!(b.tolerance >= 0.0)) throw ConfigError("battery.tolerance must be nonnegative");
    if (b.n_boot < 2) throw ConfigError("battery.n_boot must be at least 2");
    return b;
}

nlohmann::json Battery::to_json() const {
    nlohmann::json lambda = picard_options.lambda < 0.0 ? nlohmann::json("auto") : nlohmann::json(picard_options.lambda);
    return {{"checks", checks},
            {"simulate", simulate},
            {"tests", tests},
            {"path_tests", path_tests},
            {"picard", picard},
            {"check_samples", check_samples},
            {"check_particles", check_particles},
            {"tolerance", tolerance},
            {"alpha", alpha},
            {"n_boot", n_boot},
            {"ordered_fraction_min", ordered_fraction_min},
            {"picard_options",
             {{"lambda", lambda},
              {"tol", picard_options.tol},
              {"max_iter", picard_options.max_iter},
              {"k_samples", picard_options.k_samples}}}};
}

nlohmann::json Scenario::to_json() const {
    nlohmann::json j = {{"name", name},
                        {"description", description},
                        {"model", model_json},
                        {"initial", initial.to_json()},
                        {"sim", sim.to_json()},
                        {"battery", battery.to_json()}};
    if (!model_bar_json.is_null()) j["model_bar"] = model_bar_json;
    if (lower_initial) j["lower_initial"] = lower_initial->to_json();
    if (labelled) {
        j["ground_truth"] = {{"order_preserving", to_string(order_label)}, {"fkg_preserving", to_string(fkg_label)}};
    }
    return j;
}

void apply_overrides(nlohmann::json& s, const Overrides& o) {
    if (!s.is_object()) return;
    auto& sim = s["sim"];
    if (sim.is_null()) sim = nlohmann::json::object();
    auto& battery = s["battery"];
    if (battery.is_null()) battery = nlohmann::json::object();
    if (o.seed) sim["seed"] = *o.seed;
    if (o.particles) sim["particles"] = *o.particles;
    if (o.dt) sim["dt"] = *o.dt;
    if (o.horizon) sim["T"] = *o.horizon;
    if (o.alpha) battery["alpha"] = *o.alpha;
    if (o.tolerance) battery["tolerance"] = *o.tolerance;
    if (o.samples) battery["check_samples"] = *o.samples;
}

Scenario parse_scenario(const nlohmann::json& j, const std::string& base_dir) {
    try {
        check_keys(j, "scenario",
                   {"name", "description", "model", "model_bar", "initial", "lower_initial", "sim", "battery",
                    "ground_truth"});
        Scenario s;
        s.name = j.at("name").get<std::string>();
        if (s.name.empty()) throw ConfigError("scenario name must be non-empty");
        s.description = j.value("description", std::string());

        const nlohmann::json sim = j.value("sim", nlohmann::json::object());
        check_keys(sim, "sim", {"s", "T", "dt", "particles", "seed", "save_every"});
        s.sim.s = sim.value("s", s.sim.s);
        s.sim.T = sim.value("T", s.sim.T);
        s.sim.dt = sim.value("dt", s.sim.dt);
        s.sim.particles = sim.value("particles", s.sim.particles);
        s.sim.seed = sim.value("seed", s.sim.seed);
        s.sim.save_every = sim.value("save_every", s.sim.save_every);
        s.sim.validate();
        if (s.sim.particles < 1) throw ConfigError("sim.particles must be positive");

        s.model_json = j.at("model");
        const CoefficientModel upper = build_model(s.model_json, s.sim.T, s.sim.seed);
        CoefficientModel lower = upper;
        if (j.contains("model_bar") && !j.at("model_bar").is_null()) {
            s.model_bar_json = j.at("model_bar");
            lower = build_model(s.model_bar_json, s.sim.T, s.sim.seed);
        }
        s.models = ModelPair(lower, upper);
        const int d = upper.dim();
        if (upper.depends_on_measure() && s.sim.particles < 2) throw ConfigError("mean-field models need N >= 2");

        s.initial = InitialSpec::from_json(j.at("initial"), d, base_dir);
        if (j.contains("lower_initial")) {
            s.lower_initial = InitialSpec::from_json(j.at("lower_initial"), d, base_dir);
            if (s.lower_initial->kind == InitialSpec::Kind::kShift) {
                throw ConfigError("lower_initial cannot be a shift; shift the upper initial instead");
            }
        } else if (s.initial.kind == InitialSpec::Kind::kShift) {
            throw ConfigError("a shift initial needs lower_initial");
        }
        s.battery = Battery::from_json(j.value("battery", nlohmann::json()));
        if (j.contains("ground_truth")) {
            const auto& g = j.at("ground_truth");
            check_keys(g, "ground_truth", {"order_preserving", "fkg_preserving"});
            s.labelled = true;
            s.order_label = label_field(g, "order_preserving");
            s.fkg_label = label_field(g, "fkg_preserving");
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
}

Scenario load_scenario(const std::string& path, const Overrides& o) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("malformed scenario JSON in " + path + ": " + e.what());
    }
    apply_overrides(j, o);
    return parse_scenario(j, std::filesystem::path(path).parent_path().string().empty()
                                 ? std::string(".")
                                 : std::filesystem::path(path).parent_path().string());
}

CoupledClouds initial_coupling(const Scenario& s) {
    const int d = s.models.dim();
    const std::size_t n = s.sim.particles;
    const std::uint64_t seed = s.sim.seed;
    if (!s.lower_initial) {
        const EmpiricalMeasure mu0 = sample_initial(s.initial, d, n, seed, 0);
        return comonotone_coupling(mu0, mu0, {});
    }
    const EmpiricalMeasure nu0 = sample_initial(*s.lower_initial, d, n, seed, 1);
    if (s.initial.kind == InitialSpec::Kind::kShift) {
        CouplingMode mode;
        mode.kind = CouplingMode::Kind::kPushforward;
        mode.map = MonotoneMap::shift(s.initial.point);
        return comonotone_coupling(nu0, EmpiricalMeasure(), mode);
    }
    const EmpiricalMeasure mu0 = sample_initial(s.initial, d, n, seed, 0);
    if (s.initial.kind == InitialSpec::Kind::kDelta && s.lower_initial->kind == InitialSpec::Kind::kDelta) {
        return comonotone_coupling(nu0, mu0, {});
    }
    if (d == 1) {
        CouplingMode mode;
        mode.kind = CouplingMode::Kind::kQuantile1d;
        return comonotone_coupling(nu0, mu0, mode);
    }
    throw ConfigError("cannot build an ordered coupling of the initial laws for d > 1; use an upper initial of kind shift");
}

namespace {

const char* const kBuiltins[] = {
    R"json({
  "name": "mkv-ou-1d",
  "description": "Mean-field Ornstein-Uhlenbeck; drift comparison, diffusion locality and nonnegativity all hold.",
  "model": {"dim": 1, "drift": ["-x1 + avg(y1)"], "diffusion": [["0.5"]]},
  "initial": {"kind": "delta", "point": [1]},
  "lower_initial": {"kind": "delta", "point": [0]},
  "sim": {"T": 1, "dt": 0.001, "particles": 10000, "seed": 1, "save_every": 100},
  "ground_truth": {"order_preserving": "yes", "fkg_preserving": "yes"}
})json",
    R"json({
  "name": "mkv-ou-2d",
  "description": "Cooperative two-dimensional mean-field OU with nonnegative constant cross-diffusion.",
  "model": {"dim": 2,
            "drift": ["-x1 + 0.5*x2 + avg(y1)", "-x2 + 0.5*x1 + avg(y2)"],
            "diffusion": [["0.5", "0.1"], ["0.1", "0.5"]]},
  "initial": {"kind": "delta", "point": [1, 1]},
  "lower_initial": {"kind": "delta", "point": [0, 0]},
  "sim": {"T": 1, "dt": 0.001, "particles": 10000, "seed": 2, "save_every": 100},
  "ground_truth": {"order_preserving": "yes", "fkg_preserving": "yes"}
})json",
    R"json({
  "name": "brownian-negcorr",
  "description": "Brownian motion with negatively correlated components; a12 < 0 breaks positive correlation.",
  "model": {"dim": 2, "drift": ["0", "0"], "diffusion": [["1", "-0.5"], ["-0.5", "1"]]},
  "initial": {"kind": "delta", "point": [0, 0]},
  "sim": {"T": 1, "dt": 0.001, "particles": 10000, "seed": 3, "save_every": 100},
  "ground_truth": {"order_preserving": "yes", "fkg_preserving": "no"}
})json",
    R"json({
  "name": "order-violating-skew",
  "description": "b1 = -x1 - x2 decreases in x2, violating the drift comparison condition.",
  "model": {"dim": 2, "drift": ["-x1 - x2", "-x2"], "diffusion": [["0.5", "0"], ["0", "0.5"]]},
  "initial": {"kind": "delta", "point": [0, 1]},
  "lower_initial": {"kind": "delta", "point": [0, 0]},
  "sim": {"T": 1, "dt": 0.001, "particles": 10000, "seed": 4, "save_every": 100},
  "ground_truth": {"order_preserving": "no", "fkg_preserving": "no"}
})json",
    R"json({
  "name": "nonlocal-diffusion",
  "description": "a12 depends on x3, violating diffusion locality.",
  "model": {"dim": 3, "drift": ["-x1", "-x2", "-x3"],
            "diffusion": [["1", "0.5 + 0.25*tanh(x3)", "0"], ["", "1", "0"], ["", "", "1"]]},
  "initial": {"kind": "delta", "point": [0.5, 0.5, 0.5]},
  "lower_initial": {"kind": "delta", "point": [0, 0, 0]},
  "sim": {"T": 1, "dt": 0.001, "particles": 2000, "seed": 5, "save_every": 100},
  "ground_truth": {"order_preserving": "no", "fkg_preserving": "no"}
})json",
    R"json({
  "name": "bar-dominated",
  "description": "Lower drift is the upper drift minus one; same diffusion.",
  "model": {"dim": 1, "drift": ["-x1 + avg(y1)"], "diffusion": [["0.5"]]},
  "model_bar": {"dim": 1, "drift": ["-x1 + avg(y1) - 1"], "diffusion": [["0.5"]]},
  "initial": {"kind": "delta", "point": [0]},
  "sim": {"T": 1, "dt": 0.001, "particles": 10000, "seed": 6, "save_every": 100},
  "ground_truth": {"order_preserving": "yes", "fkg_preserving": "yes"}
})json",
    R"json({
  "name": "measure-antitone",
  "description": "Each drift decreases in the mean of the other coordinate, so the drift is antitone in the measure.",
  "model": {"dim": 2, "drift": ["-x1 - avg(y2)", "-x2 - avg(y1)"], "diffusion": [["0.5", "0"], ["0", "0.5"]]},
  "initial": {"kind": "delta", "point": [1, 1]},
  "lower_initial": {"kind": "delta", "point": [0, 0]},
  "sim": {"T": 1, "dt": 0.001, "particles": 10000, "seed": 7, "save_every": 100},
  "ground_truth": {"order_preserving": "no", "fkg_preserving": "unknown"}
})json",
    R"json({
  "name": "picard-bench",
  "description": "Mean-field OU used for Picard contraction traces.",
  "model": {"dim": 1, "drift": ["-x1 + avg(y1)"], "diffusion": [["0.5"]]},
  "initial": {"kind": "delta", "point": [1]},
  "sim": {"T": 1, "dt": 0.001, "particles": 10000, "seed": 8, "save_every": 100},
  "battery": {"picard": true, "picard_options": {"lambda": "auto", "tol": 1e-6, "max_iter": 12}},
  "ground_truth": {"order_preserving": "yes", "fkg_preserving": "yes"}
})json",
    R"json({
  "name": "tinhom-linear",
  "description": "Time-inhomogeneous linear drift without measure dependence.",
  "model": {"dim": 1, "drift": ["sin(t) - x1"], "diffusion": [["0.5"]]},
  "initial": {"kind": "gaussian", "mean": [0.5], "covariance": [[0.25]]},
  "lower_initial": {"kind": "gaussian", "mean": [0], "covariance": [[0.25]]},
  "sim": {"T": 1, "dt": 0.001, "particles": 10000, "seed": 9, "save_every": 100},
  "ground_truth": {"order_preserving": "yes", "fkg_preserving": "yes"}
})json",
    R"json({
  "name": "sigmoid-cross-diffusion",
  "description": "State-dependent nonnegative cross-diffusion a12 = 0.25 sigmoid(x1 + x2).",
  "model": {"dim": 2, "drift": ["-x1", "-x2"],
            "diffusion": [["0.5", "0.25*sigmoid(x1 + x2)"], ["", "0.5"]]},
  "initial": {"kind": "shift", "offset": [0.5, 0.25]},
  "lower_initial": {"kind": "uniform", "lo": [-1, -1], "hi": [1, 1]},
  "sim": {"T": 1, "dt": 0.001, "particles": 2000, "seed": 10, "save_every": 100},
  "ground_truth": {"order_preserving": "yes", "fkg_preserving": "yes"}
})json",
};

}  // namespace

std::vector<nlohmann::json> builtin_scenario_configs() {
    std::vector<nlohmann::json> out;
    for (const char* text : kBuiltins) out.push_back(nlohmann::json::parse(text));
    return out;
}

std::vector<Scenario> builtin_scenarios() {
    std::vector<Scenario> out;
    for (const auto& j : builtin_scenario_configs()) out.push_back(parse_scenario(j));
    return out;
}

nlohmann::json builtin_scenario_config(const std::string& name) {
    for (const auto& j : builtin_scenario_configs()) {
        if (j.at("name") == name) return j;
    }
    throw ConfigError("unknown builtin scenario '" + name + "'");
}

Scenario builtin_scenario(const std::string& name, const Overrides& o) {
    nlohmann::json j = builtin_scenario_config(name);
    apply_overrides(j, o);
    return parse_scenario(j);
}

}  // namespace mckv
