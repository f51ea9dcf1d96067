#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mckv/checker.hpp"
#include "mckv/measure.hpp"
#include "mckv/scenario.hpp"

namespace mckv {

inline constexpr int kSchemaVersion = 1;

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRejected = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

struct Report {
    nlohmann::json scenario;
    nlohmann::json checks = nlohmann::json::array();
    nlohmann::json tests = nlohmann::json::array();
    nlohmann::json picard;  // null when not run
    nlohmann::json timings = nlohmann::json::object();
    std::uint64_t seed = 0;
    int exit_code = kExitOk;

    nlohmann::json to_json() const;
    static Report from_json(const nlohmann::json& j);
    friend bool operator==(const Report&, const Report&) = default;
};

struct RunOptions {
    // Record wall-clock seconds per phase. Off by default so that reports are
    // byte-identical across reruns; work counters are always recorded.
    bool wall_clock = false;
};

struct RunOutput {
    Report report;
    std::optional<PathEnsemble> upper_ensemble;
    std::optional<PathEnsemble> lower_ensemble;
    std::optional<MeasureFlow> picard_flow;
};

// Runs the selected battery in order: checks, simulate, tests, picard.
// Exit code 1 when a check fails or a test rejects for a property whose label
// is not "unknown", or when a predicted label contradicts the ground truth.
RunOutput run_scenario(const Scenario& s, const RunOptions& opts = {});

// Writes report.json, flows/*.csv, ensembles/*.csv and manifest.json.
void emit_report(const RunOutput& run, const std::string& dir);

// Git blob object id: SHA-1 of "blob <size>\0" + content, lowercase hex.
std::string git_blob_sha1(const std::string& content);

// Stable byte form of a report.
std::string dump_report(const Report& r);

}  // namespace mckv
