#include "mckv/model.hpp"

#include <cmath>
#include <sstream>

#include "mckv/error.hpp"
#include "mckv/wasserstein.hpp"

namespace mckv {

namespace {

std::size_t packed_index(int i, int j, int d) {
    if (i > j) std::swap(i, j);
    // Row i of the upper triangle starts after i rows of lengths d, d-1, ...
    return static_cast<std::size_t>(i * d - i * (i - 1) / 2 + (j - i));
}

std::string point_to_string(double t, std::span<const double> x) {
    std::ostringstream os;
    os << "t=" << format_double(t) << ", x=(";
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? "," : "") << format_double(x[i]);
    os << ')';
    return os.str();
}

Eigen::MatrixXd sqrt_from_eigen(const Eigen::VectorXd& evals, const Eigen::MatrixXd& evecs, double scale) {
    const double min_eval = evals.minCoeff();
    if (min_eval < -kPdTolerance * scale) {
        throw PdError("diffusion matrix not positive semidefinite (min eigenvalue " + format_double(min_eval / scale) + ")");
    }
    Eigen::VectorXd roots = evals.unaryExpr([](double v) { return v > 0.0 ? std::sqrt(v) : 0.0; });
    const Eigen::MatrixXd s = evecs * roots.asDiagonal() * evecs.transpose();
    return 0.5 * (s + s.transpose());
}

}  // namespace

CoefficientModel::CoefficientModel(int dim, const std::vector<std::string>& drift,
                                   const std::vector<std::vector<std::string>>& diffusion, std::string label)
    : dim_(dim), label_(std::move(label)) {
    if (dim < 1) throw ConfigError("model dimension must be positive");
    if (drift.size() != static_cast<std::size_t>(dim)) {
        throw ConfigError("model needs " + std::to_string(dim) + " drift entries, got " + std::to_string(drift.size()));
    }
    if (diffusion.size() != static_cast<std::size_t>(dim)) throw ConfigError("diffusion must have dim rows");
    for (const auto& row : diffusion) {
        if (row.size() != static_cast<std::size_t>(dim)) throw ConfigError("diffusion rows must have dim entries");
    }
    for (const auto& s : drift) drift_.push_back(parse_expr(s, dim));
    for (int i = 0; i < dim; ++i) {
        for (int j = i; j < dim; ++j) {
            const std::string& up = diffusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            const std::string& lo = diffusion[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
            if (up.empty() && lo.empty()) {
                throw ConfigError("diffusion entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ") missing");
            }
            if (lo.empty() || i == j) {
                upper_.push_back(parse_expr(up, dim));
            } else if (up.empty()) {
                upper_.push_back(parse_expr(lo, dim));
            } else {
                CoeffExpr a = parse_expr(up, dim);
                CoeffExpr b = parse_expr(lo, dim);
                upper_.push_back(a.to_string() == b.to_string() ? std::move(a) : combine_average(a, b));
            }
        }
    }
}

const CoeffExpr& CoefficientModel::diffusion(int i, int j) const { return upper_[packed_index(i, j, dim_)]; }

bool CoefficientModel::depends_on_measure() const noexcept {
    for (const auto& e : drift_) {
        if (e.depends_on_measure()) return true;
    }
    for (const auto& e : upper_) {
        if (e.depends_on_measure()) return true;
    }
    return false;
}

bool CoefficientModel::diffusion_depends_on_x() const noexcept {
    for (const auto& e : upper_) {
        if (e.depends_on_x()) return true;
    }
    return false;
}

void CoefficientModel::drift_at(double t, std::span<const double> x, const EmpiricalMeasure* mu,
                                std::span<double> out) const {
    for (int i = 0; i < dim_; ++i) out[static_cast<std::size_t>(i)] = drift_[static_cast<std::size_t>(i)].eval(t, x, mu);
}

Eigen::MatrixXd CoefficientModel::diffusion_at(double t, std::span<const double> x, const EmpiricalMeasure* mu) const {
    Eigen::MatrixXd a(dim_, dim_);
    for (int i = 0; i < dim_; ++i) {
        for (int j = i; j < dim_; ++j) {
            const double v = diffusion(i, j).eval(t, x, mu);
            a(i, j) = v;
            a(j, i) = v;
        }
    }
    return a;
}

Eigen::MatrixXd CoefficientModel::sigma_at(double t, std::span<const double> x, const EmpiricalMeasure* mu) const {
    try {
        return diffusion_sqrt(diffusion_at(t, x, mu));
    } catch (const PdError& e) {
        throw PdError(std::string(e.what()) + " at " + point_to_string(t, x));
    }
}

nlohmann::json CoefficientModel::to_json() const {
    nlohmann::json j;
    j["dim"] = dim_;
    j["label"] = label_;
    auto& drift = j["drift"] = nlohmann::json::array();
    for (const auto& e : drift_) drift.push_back(e.to_string());
    auto& diff = j["diffusion"] = nlohmann::json::array();
    for (int i = 0; i < dim_; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int k = 0; k < dim_; ++k) row.push_back(diffusion(i, k).to_string());
        diff.push_back(row);
    }
    return j;
}

std::string CoefficientModel::canonical_text() const { return to_json().dump(); }

ModelPair::ModelPair(CoefficientModel lo, CoefficientModel up) : lower(std::move(lo)), upper(std::move(up)) {
    if (lower.dim() != upper.dim()) throw DimensionError("model pair dimensions differ");
}

Eigen::MatrixXd diffusion_sqrt(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols() || a.rows() == 0) throw DimensionError("diffusion_sqrt: matrix must be square");
    const Eigen::Index d = a.rows();
    if (d == 1) {
        const double v = 2.0 * a(0, 0);
        if (v < -2.0 * kPdTolerance) {
            throw PdError("diffusion matrix not positive semidefinite (min eigenvalue " + format_double(a(0, 0)) + ")");
        }
        return Eigen::MatrixXd::Constant(1, 1, v > 0.0 ? std::sqrt(v) : 0.0);
    }
    // Eigen-decompose a itself so the tolerance applies to a's eigenvalues;
    // sqrt(2a) = V sqrt(2 Lambda) V^T.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success) throw NumericalError("diffusion_sqrt: eigendecomposition failed");
    return sqrt_from_eigen(2.0 * es.eigenvalues(), es.eigenvectors(), 2.0);
}

CoefficientModel build_model(const nlohmann::json& config, double horizon, std::uint64_t seed) {
    if (!config.is_object()) throw ConfigError("model config must be an object");
    if (!config.contains("dim") || !config["dim"].is_number_integer()) throw ConfigError("model config needs integer 'dim'");
    const int dim = config["dim"].get<int>();
    if (dim < 1) throw ConfigError("model 'dim' must be positive");
    if (!config.contains("drift") || !config["drift"].is_array()) throw ConfigError("model config needs 'drift' array");
    if (!config.contains("diffusion") || !config["diffusion"].is_array()) {
        throw ConfigError("model config needs 'diffusion' matrix");
    }
    std::vector<std::string> drift;
    for (const auto& e : config["drift"]) {
        if (!e.is_string()) throw ConfigError("drift entries must be strings");
        drift.push_back(e.get<std::string>());
    }
    std::vector<std::vector<std::string>> diffusion;
    const auto& rows = config["diffusion"];
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].is_array()) throw ConfigError("diffusion rows must be arrays");
        std::vector<std::string> row(static_cast<std::size_t>(dim));
        // Rows may list only the upper triangle: row i then has dim - i entries.
        const std::size_t given = rows[i].size();
        const std::size_t skip = given == static_cast<std::size_t>(dim) ? 0 : i;
        if (given + skip != static_cast<std::size_t>(dim)) throw ConfigError("diffusion row " + std::to_string(i + 1) + " has wrong length");
        for (std::size_t k = 0; k < given; ++k) {
            const auto& e = rows[i][k];
            if (e.is_string()) {
                row[k + skip] = e.get<std::string>();
            } else if (e.is_number()) {
                row[k + skip] = format_double(e.get<double>());
            } else if (!e.is_null()) {
                throw ConfigError("diffusion entries must be strings or numbers");
            }
        }
        diffusion.push_back(std::move(row));
    }
    CoefficientModel model(dim, drift, diffusion, config.value("label", std::string{}));

    DomainSampler sampler;
    sampler.box.t_hi = horizon;
    sampler.seed = seed;
    sampler.particles = 16;
    for (std::uint32_t k = 0; k < 100; ++k) {
        const DomainSample s = sampler.sample(dim, k);
        (void)model.sigma_at(s.t, s.x, &s.mu);
    }
    return model;
}

BoundModel::BoundModel(const CoefficientModel& model, double t, const EmpiricalMeasure* mu)
    : model_(&model), t_(t), mu_(mu) {
    const int d = model.dim();
    for (int i = 0; i < d; ++i) drift_cache_.push_back(model.drift(i).bind_averages(t, mu));
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) diffusion_cache_.push_back(model.diffusion(i, j).bind_averages(t, mu));
    }
    if (!model.diffusion_depends_on_x()) {
        constant_sigma_ = true;
        const std::vector<double> origin(static_cast<std::size_t>(d), 0.0);
        Eigen::MatrixXd a(d, d);
        std::size_t k = 0;
        for (int i = 0; i < d; ++i) {
            for (int j = i; j < d; ++j, ++k) {
                const double v = model.diffusion(i, j).eval_bound(t, origin, mu, diffusion_cache_[k]);
                a(i, j) = v;
                a(j, i) = v;
            }
        }
        Eigen::MatrixXd s;
        try {
            s = diffusion_sqrt(a);
        } catch (const PdError& e) {
            throw PdError(std::string(e.what()) + " at t=" + format_double(t));
        }
        sigma_.resize(static_cast<std::size_t>(d * d));
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) sigma_[static_cast<std::size_t>(i * d + j)] = s(i, j);
        }
    }
}

void BoundModel::drift(std::span<const double> x, std::span<double> out) const {
    const int d = model_->dim();
    for (int i = 0; i < d; ++i) {
        out[static_cast<std::size_t>(i)] =
            model_->drift(i).eval_bound(t_, x, mu_, drift_cache_[static_cast<std::size_t>(i)]);
    }
}

void BoundModel::sigma(std::span<const double> x, std::span<double> out) const {
    if (constant_sigma_) {
        std::copy(sigma_.begin(), sigma_.end(), out.begin());
        return;
    }
    const int d = model_->dim();
    if (d == 1) {
        const double a = model_->diffusion(0, 0).eval_bound(t_, x, mu_, diffusion_cache_[0]);
        if (a < -kPdTolerance) throw PdError("diffusion negative (" + format_double(a) + ") at " + point_to_string(t_, x));
        out[0] = a > 0.0 ? std::sqrt(2.0 * a) : 0.0;
        return;
    }
    Eigen::MatrixXd a(d, d);
    std::size_t k = 0;
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j, ++k) {
            const double v = model_->diffusion(i, j).eval_bound(t_, x, mu_, diffusion_cache_[k]);
            a(i, j) = v;
            a(j, i) = v;
        }
    }
    Eigen::MatrixXd s;
    try {
        s = diffusion_sqrt(a);
    } catch (const PdError& e) {
        throw PdError(std::string(e.what()) + " at " + point_to_string(t_, x));
    }
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(i * d + j)] = s(i, j);
    }
}

AssumptionEstimate estimate_assumption_K(const ModelPair& pair, const DomainSampler& sampler, std::size_t n) {
    if (n < 1) throw ConfigError("estimate_assumption_K: need at least one sample");
    const int d = pair.dim();
    AssumptionEstimate est;
    double best = 0.0;
    std::vector<double> bx(static_cast<std::size_t>(d)), by(static_cast<std::size_t>(d));
    for (std::size_t k = 0; k < n; ++k) {
        const auto idx = static_cast<std::uint32_t>(k);
        DomainSample a = sampler.sample(d, 2 * idx);
        const DomainSample b = sampler.sample(d, 2 * idx + 1);
        PhiloxStream coin(sampler.seed, StreamTag::kAssumption, idx);
        std::vector<double> y = b.x;
        EmpiricalMeasure nu = b.mu;
        const double u = coin.uniform();
        if (u < 0.25) {
            y = a.x;  // probe the measure term alone
        } else if (u < 0.5) {
            nu = a.mu;  // probe the spatial term alone
        }
        double dx2 = 0.0;
        for (int i = 0; i < d; ++i) dx2 += (a.x[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(i)]) *
                                           (a.x[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(i)]);
        const double w = (u >= 0.25 && u < 0.5) ? 0.0 : w2(a.mu, nu, W2Method::automatic(sampler.seed));
        const double denom = dx2 + w * w;
        if (denom <= 0.0) {
            ++est.skipped;
            continue;
        }
        ++est.samples_used;
        for (const CoefficientModel* m : {&pair.upper, &pair.lower}) {
            m->drift_at(a.t, a.x, &a.mu, bx);
            m->drift_at(a.t, y, &nu, by);
            double inner = 0.0;
            for (int i = 0; i < d; ++i) {
                const auto ui = static_cast<std::size_t>(i);
                inner += (bx[ui] - by[ui]) * (a.x[ui] - y[ui]);
            }
            const Eigen::MatrixXd ds = m->sigma_at(a.t, a.x, &a.mu) - m->sigma_at(a.t, y, &nu);
            const double ratio = (2.0 * inner + ds.squaredNorm()) / denom;
            if (ratio > best) {
                best = ratio;
                est.argmax_index = idx;
            }
        }
    }
    if (est.samples_used == 0) throw ConfigError("estimate_assumption_K: every sample was degenerate");
    est.k_hat = best;
    return est;
}

}  // namespace mckv
