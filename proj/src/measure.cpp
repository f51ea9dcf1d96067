#include "mckv/measure.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "mckv/error.hpp"
#include "mckv/rng.hpp"

namespace mckv {

EmpiricalMeasure::EmpiricalMeasure(int dim, std::vector<double> values) : dim_(dim), values_(std::move(values)) {
    if (dim_ < 1) throw ConfigError("measure dimension must be positive");
    if (values_.size() % static_cast<std::size_t>(dim_) != 0) {
        throw ConfigError("particle array size is not a multiple of the dimension");
    }
}

std::vector<double> EmpiricalMeasure::column(int i) const {
    std::vector<double> out(size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = particle(k)[static_cast<std::size_t>(i)];
    return out;
}

std::vector<double> EmpiricalMeasure::mean() const {
    std::vector<double> m(static_cast<std::size_t>(dim_), 0.0);
    for (std::size_t k = 0; k < size(); ++k) {
        auto p = particle(k);
        for (std::size_t i = 0; i < m.size(); ++i) m[i] += p[i];
    }
    for (double& v : m) v /= static_cast<double>(size());
    return m;
}

std::vector<double> EmpiricalMeasure::covariance() const {
    const auto d = static_cast<std::size_t>(dim_);
    const std::vector<double> m = mean();
    std::vector<double> c(d * d, 0.0);
    for (std::size_t k = 0; k < size(); ++k) {
        auto p = particle(k);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) c[i * d + j] += (p[i] - m[i]) * (p[j] - m[j]);
        }
    }
    for (double& v : c) v /= static_cast<double>(size());
    return c;
}

EmpiricalMeasure from_samples(int dim, std::vector<double> values) {
    if (values.empty()) throw ConfigError("from_samples: empty input");
    for (double v : values) {
        if (!std::isfinite(v)) throw ConfigError("from_samples: non-finite entry");
    }
    return EmpiricalMeasure(dim, std::move(values));
}

EmpiricalMeasure from_samples(const std::vector<std::vector<double>>& points) {
    if (points.empty() || points.front().empty()) throw ConfigError("from_samples: empty input");
    const std::size_t d = points.front().size();
    std::vector<double> flat;
    flat.reserve(points.size() * d);
    for (const auto& p : points) {
        if (p.size() != d) throw ConfigError("from_samples: rows of unequal length");
        flat.insert(flat.end(), p.begin(), p.end());
    }
    return from_samples(static_cast<int>(d), std::move(flat));
}

std::size_t MeasureFlow::node_at_or_before(double t) const {
    if (grid.empty()) throw ConfigError("empty measure flow");
    // Tolerate round-off in t = s + k dt when it lands a hair below a node.
    const double slack = 1e-9 * std::max(1.0, std::fabs(t));
    std::size_t lo = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (grid[k] <= t + slack) lo = k;
        else break;
    }
    return lo;
}

void MeasureFlow::validate() const {
    if (grid.empty() || grid.size() != nodes.size()) throw ConfigError("measure flow: grid/node count mismatch");
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (!(grid[k] > grid[k - 1])) throw ConfigError("measure flow: grid not strictly increasing");
    }
    for (const auto& n : nodes) {
        if (n.dim() != nodes.front().dim()) throw DimensionError("measure flow: node dimensions differ");
    }
}

MeasureFlow constant_flow(const EmpiricalMeasure& mu, std::vector<double> grid) {
    MeasureFlow f;
    f.nodes.assign(grid.size(), mu);
    f.grid = std::move(grid);
    f.validate();
    return f;
}

EmpiricalMeasure PathEnsemble::marginal(std::size_t node) const {
    std::vector<double> v(paths * static_cast<std::size_t>(dim));
    for (std::size_t p = 0; p < paths; ++p) {
        for (int i = 0; i < dim; ++i) v[p * static_cast<std::size_t>(dim) + static_cast<std::size_t>(i)] = at(p, node, i);
    }
    return EmpiricalMeasure(dim, std::move(v));
}

MeasureFlow PathEnsemble::flow() const {
    MeasureFlow f;
    f.grid = grid;
    f.nodes.reserve(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) f.nodes.push_back(marginal(k));
    return f;
}

EmpiricalMeasure resample(const EmpiricalMeasure& mu, std::size_t n, std::uint64_t seed) {
    if (mu.empty()) throw ConfigError("resample: empty measure");
    const auto d = static_cast<std::size_t>(mu.dim());
    std::vector<double> v(n * d);
    PhiloxStream rng(seed, StreamTag::kResample, 0);
    const auto count = static_cast<std::uint32_t>(mu.size());
    for (std::size_t k = 0; k < n; ++k) {
        auto p = mu.particle(rng.below(count));
        std::copy(p.begin(), p.end(), v.begin() + static_cast<std::ptrdiff_t>(k * d));
    }
    return EmpiricalMeasure(mu.dim(), std::move(v));
}

EmpiricalMeasure mixture(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2, std::uint64_t seed) {
    if (mu1.dim() != mu2.dim()) throw DimensionError("mixture: dimension mismatch");
    if (mu1.empty() || mu2.empty()) throw ConfigError("mixture: empty measure");
    const std::size_t n = std::max(mu1.size(), mu2.size());
    const EmpiricalMeasure a = mu1.size() == n ? mu1 : resample(mu1, n, seed);
    const EmpiricalMeasure b = mu2.size() == n ? mu2 : resample(mu2, n, seed);
    std::vector<double> v(a.values().begin(), a.values().end());
    v.insert(v.end(), b.values().begin(), b.values().end());
    return EmpiricalMeasure(mu1.dim(), std::move(v));
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

namespace {

void write_header(std::ostream& os, const char* lead, int dim) {
    os << lead;
    for (int i = 1; i <= dim; ++i) os << ",x" << i;
    os << '\n';
}

std::vector<double> parse_row(const std::string& line, std::size_t lineno) {
    std::vector<double> row;
    std::size_t start = 0;
    while (start <= line.size()) {
        std::size_t end = line.find(',', start);
        if (end == std::string::npos) end = line.size();
        std::string_view cell(line.data() + start, end - start);
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc() || ptr != cell.data() + cell.size()) {
            throw ConfigError("csv line " + std::to_string(lineno) + ": malformed number '" + std::string(cell) + "'");
        }
        row.push_back(v);
        start = end + 1;
    }
    return row;
}

bool looks_like_header(const std::string& line) {
    for (char c : line) {
        if (std::isalpha(static_cast<unsigned char>(c)) && c != 'e' && c != 'E') return true;
    }
    return false;
}

}  // namespace

void write_flow_csv(std::ostream& os, const MeasureFlow& flow) {
    flow.validate();
    write_header(os, "t,k", flow.dim());
    for (std::size_t n = 0; n < flow.grid.size(); ++n) {
        const auto& m = flow.nodes[n];
        const std::string t = format_double(flow.grid[n]);
        for (std::size_t k = 0; k < m.size(); ++k) {
            os << t << ',' << k;
            for (double v : m.particle(k)) os << ',' << format_double(v);
            os << '\n';
        }
    }
}

void write_ensemble_csv(std::ostream& os, const PathEnsemble& e) {
    write_header(os, "path_id,t", e.dim);
    for (std::size_t p = 0; p < e.paths; ++p) {
        for (std::size_t n = 0; n < e.nodes(); ++n) {
            os << p << ',' << format_double(e.grid[n]);
            for (int i = 0; i < e.dim; ++i) os << ',' << format_double(e.at(p, n, i));
            os << '\n';
        }
    }
}

MeasureFlow read_flow_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("flow csv: missing header");
    MeasureFlow flow;
    std::vector<std::vector<double>> current;
    std::size_t lineno = 1;
    auto flush = [&] {
        if (!current.empty()) flow.nodes.push_back(from_samples(current));
        current.clear();
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto row = parse_row(line, lineno);
        if (row.size() < 3) throw ConfigError("flow csv line " + std::to_string(lineno) + ": too few columns");
        if (flow.grid.empty() || row[0] != flow.grid.back()) {
            flush();
            flow.grid.push_back(row[0]);
        }
        current.emplace_back(row.begin() + 2, row.end());
    }
    flush();
    flow.validate();
    return flow;
}

PathEnsemble read_ensemble_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("ensemble csv: missing header");
    PathEnsemble e;
    std::size_t lineno = 1;
    double last_pid = -1.0;
    std::size_t node = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto row = parse_row(line, lineno);
        if (row.size() < 3) throw ConfigError("ensemble csv line " + std::to_string(lineno) + ": too few columns");
        if (e.paths == 0) e.dim = static_cast<int>(row.size()) - 2;
        if (static_cast<int>(row.size()) - 2 != e.dim) throw ConfigError("ensemble csv: ragged rows");
        if (e.paths == 0 || row[0] != last_pid) {
            if (e.paths > 1 && node != e.grid.size()) throw ConfigError("ensemble csv: paths have different lengths");
            ++e.paths;
            last_pid = row[0];
            node = 0;
        }
        if (e.paths == 1) {
            e.grid.push_back(row[1]);
        } else if (node >= e.grid.size() || e.grid[node] != row[1]) {
            throw ConfigError("ensemble csv line " + std::to_string(lineno) + ": time grid differs between paths");
        }
        e.values.insert(e.values.end(), row.begin() + 2, row.end());
        ++node;
    }
    if (e.paths == 0) throw ConfigError("ensemble csv: no data rows");
    if (node != e.grid.size()) throw ConfigError("ensemble csv: paths have different lengths");
    return e;
}

EmpiricalMeasure read_points_csv(std::istream& is) {
    std::string line;
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        if (lineno == 1 && looks_like_header(line)) continue;
        rows.push_back(parse_row(line, lineno));
    }
    return from_samples(rows);
}

}  // namespace mckv
