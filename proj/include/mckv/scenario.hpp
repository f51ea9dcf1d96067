#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mckv/checker.hpp"
#include "mckv/measure.hpp"
#include "mckv/model.hpp"
#include "mckv/sim.hpp"

namespace mckv {

// Initial law, sampled to a particle cloud at run time.
//   {"kind": "delta", "point": [..]}
//   {"kind": "gaussian", "mean": [..], "covariance": [[..]]}
//   {"kind": "uniform", "lo": [..], "hi": [..]}
//   {"kind": "csv", "path": "file.csv"}            resampled if its size differs from N
//   {"kind": "shift", "offset": [..]}              upper only: lower cloud + offset, offset >= 0
struct InitialSpec {
    enum class Kind { kDelta, kGaussian, kUniform, kCsv, kShift };

    Kind kind = Kind::kDelta;
    std::vector<double> point;  // delta point, gaussian mean, or shift offset
    std::vector<std::vector<double>> covariance;
    std::vector<double> lo;
    std::vector<double> hi;
    std::string path;  // as written in the config
    std::string resolved_path;

    static InitialSpec from_json(const nlohmann::json& j, int dim, const std::string& base_dir);
    nlohmann::json to_json() const;
};

EmpiricalMeasure sample_initial(const InitialSpec& spec, int dim, std::size_t n, std::uint64_t seed,
                                std::uint32_t system);

struct Battery {
    bool checks = true;
    bool simulate = true;
    bool tests = true;
    bool path_tests = true;
    bool picard = false;
    std::size_t check_samples = 10000;
    int check_particles = 64;
    double tolerance = 1e-6;
    double alpha = 0.01;
    int n_boot = 1000;
    // Minimum ordered fraction of coupled particle pairs at every checkpoint.
    double ordered_fraction_min = 0.995;
    PicardOptions picard_options;

    static Battery from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct Scenario {
    std::string name;
    std::string description;
    nlohmann::json model_json;
    nlohmann::json model_bar_json;  // null when the lower model equals the upper one
    ModelPair models;
    InitialSpec initial;                     // upper system
    std::optional<InitialSpec> lower_initial;  // lower system; defaults to `initial`
    SimConfig sim;
    Battery battery;
    bool labelled = false;
    Label order_label = Label::kUnknown;
    Label fkg_label = Label::kUnknown;

    bool has_lower_system() const { return !model_bar_json.is_null() || lower_initial.has_value(); }
    nlohmann::json to_json() const;
};

// Command-line overrides applied on top of a scenario file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> particles;
    std::optional<double> dt;
    std::optional<double> horizon;
    std::optional<double> alpha;
    std::optional<double> tolerance;
    std::optional<std::size_t> samples;
};

void apply_overrides(nlohmann::json& scenario, const Overrides& o);

// Throws ConfigError (exit code 2) on malformed input.
Scenario parse_scenario(const nlohmann::json& j, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path, const Overrides& o = {});

// Labelled corpus instantiating the order and positive-correlation conditions
// and their violations.
std::vector<nlohmann::json> builtin_scenario_configs();
std::vector<Scenario> builtin_scenarios();
// Throws ConfigError for an unknown name.
nlohmann::json builtin_scenario_config(const std::string& name);
Scenario builtin_scenario(const std::string& name, const Overrides& o = {});

// Ordered initial clouds for the lower and upper systems, paired particle by particle.
CoupledClouds initial_coupling(const Scenario& s);

}  // namespace mckv
