#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mckv {

// Uniform-weight particle cloud. Particles are stored row-major, one row of
// `dim()` coordinates per particle.
class EmpiricalMeasure {
public:
    EmpiricalMeasure() = default;
    EmpiricalMeasure(int dim, std::vector<double> values);

    int dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return dim_ > 0 ? values_.size() / static_cast<std::size_t>(dim_) : 0; }
    bool empty() const noexcept { return values_.empty(); }

    std::span<const double> particle(std::size_t k) const {
        return {values_.data() + k * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
    }
    std::span<double> particle(std::size_t k) {
        return {values_.data() + k * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
    }
    std::span<const double> values() const noexcept { return values_; }
    std::vector<double>& mutable_values() noexcept { return values_; }

    // Coordinate `i` (0-based) of every particle.
    std::vector<double> column(int i) const;
    std::vector<double> mean() const;
    // Population covariance (divides by N), row-major dim x dim.
    std::vector<double> covariance() const;

    friend bool operator==(const EmpiricalMeasure&, const EmpiricalMeasure&) = default;

private:
    int dim_ = 0;
    std::vector<double> values_;
};

// Builds a measure from rows of equal length. Throws ConfigError on empty
// input, ragged rows or non-finite entries.
EmpiricalMeasure from_samples(const std::vector<std::vector<double>>& points);
EmpiricalMeasure from_samples(int dim, std::vector<double> values);

// Time-indexed clouds approximating t -> mu_t on a strictly increasing grid.
struct MeasureFlow {
    std::vector<double> grid;
    std::vector<EmpiricalMeasure> nodes;

    int dim() const { return nodes.empty() ? 0 : nodes.front().dim(); }
    // Index of the last node with grid time <= t (left-continuous lookup).
    std::size_t node_at_or_before(double t) const;
    void validate() const;
};

MeasureFlow constant_flow(const EmpiricalMeasure& mu, std::vector<double> grid);

// N sampled paths on a shared grid, stored [path][node][coordinate].
struct PathEnsemble {
    std::vector<double> grid;
    std::size_t paths = 0;
    int dim = 0;
    std::uint64_t seed = 0;
    std::vector<double> values;

    std::size_t nodes() const { return grid.size(); }
    double at(std::size_t path, std::size_t node, int coord) const {
        return values[(path * grid.size() + node) * static_cast<std::size_t>(dim) + static_cast<std::size_t>(coord)];
    }
    double& at(std::size_t path, std::size_t node, int coord) {
        return values[(path * grid.size() + node) * static_cast<std::size_t>(dim) + static_cast<std::size_t>(coord)];
    }
    EmpiricalMeasure marginal(std::size_t node) const;
    MeasureFlow flow() const;
};

// Equal-weight mixture as a union cloud. Unequal sizes: the smaller cloud is
// resampled with replacement (seeded) to the larger size first.
EmpiricalMeasure mixture(const EmpiricalMeasure& mu1, const EmpiricalMeasure& mu2, std::uint64_t seed = 0);

// Resample with replacement to `n` particles.
EmpiricalMeasure resample(const EmpiricalMeasure& mu, std::size_t n, std::uint64_t seed);

// CSV in the interchange layout: "t,k,x1..xd" for flows and
// "path_id,t,x1..xd" for ensembles. Numbers use shortest round-trip form.
void write_flow_csv(std::ostream& os, const MeasureFlow& flow);
void write_ensemble_csv(std::ostream& os, const PathEnsemble& ensemble);
MeasureFlow read_flow_csv(std::istream& is);
PathEnsemble read_ensemble_csv(std::istream& is);
// Plain point cloud: optional header row "x1,..,xd", one particle per line.
EmpiricalMeasure read_points_csv(std::istream& is);

std::string format_double(double v);

}  // namespace mckv
