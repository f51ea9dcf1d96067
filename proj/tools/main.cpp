#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mckv/error.hpp"
#include "mckv/kernels.hpp"
#include "mckv/report.hpp"
#include "mckv/scenario.hpp"
#include "mckv/stat_tests.hpp"
#include "mckv/test_functions.hpp"

namespace {

struct CommonFlags {
    mckv::Overrides overrides;
    std::string out = "out";
    bool timings = false;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--seed", f.overrides.seed, "RNG seed");
    cmd->add_option("--particles", f.overrides.particles, "particle count N");
    cmd->add_option("--dt", f.overrides.dt, "Euler step");
    cmd->add_option("--horizon", f.overrides.horizon, "final time T");
    cmd->add_option("--alpha", f.overrides.alpha, "test level");
    cmd->add_option("--tolerance", f.overrides.tolerance, "check tolerance");
    cmd->add_option("--samples", f.overrides.samples, "samples per structural check");
    cmd->add_option("--out", f.out, "output directory")->capture_default_str();
    cmd->add_flag("--timings", f.timings, "record wall-clock seconds in report.json");
    cmd->add_option("--threads", f.threads, "OpenMP worker count (0 = default)");
}

mckv::Scenario resolve_scenario(const std::string& ref, const mckv::Overrides& o) {
    if (std::filesystem::exists(ref)) return mckv::load_scenario(ref, o);
    return mckv::builtin_scenario(ref, o);
}

void print_summary(const mckv::Report& r, const std::string& dir) {
    const auto& sc = r.scenario;
    std::cout << "scenario " << sc.at("config").at("name").get<std::string>() << '\n';
    for (const auto& c : r.checks) {
        std::cout << "  check " << c.at("verdict").get<std::string>() << "  " << c.at("id").get<std::string>() << '\n';
    }
    for (const auto& t : r.tests) {
        std::cout << "  test  " << t.at("verdict").get<std::string>() << "  " << t.at("id").get<std::string>() << '\n';
    }
    if (!sc.at("predicted").is_null()) {
        std::cout << "  predicted order=" << sc["predicted"]["order_preserving"].get<std::string>()
                  << " fkg=" << sc["predicted"]["fkg_preserving"].get<std::string>() << '\n';
    }
    if (!r.picard.is_null()) {
        std::cout << "  picard iterations=" << r.picard.at("iterations") << " converged=" << r.picard.at("converged")
                  << " lambda=" << r.picard.at("lambda") << '\n';
    }
    std::cout << "  exit_code " << r.exit_code << "  report " << (std::filesystem::path(dir) / "report.json").string()
              << '\n';
}

int run_battery(const std::string& ref, const CommonFlags& f, const char* only) {
    if (f.threads > 0) mckv::kernels::set_threads(f.threads);
    mckv::Scenario s = resolve_scenario(ref, f.overrides);
    if (only) {
        const std::string which = only;
        s.battery.checks = which == "check";
        s.battery.simulate = which == "simulate";
        s.battery.tests = false;
        s.battery.picard = which == "picard";
    }
    mckv::RunOptions ro;
    ro.wall_clock = f.timings;
    const mckv::RunOutput out = mckv::run_scenario(s, ro);
    mckv::emit_report(out, f.out);
    print_summary(out.report, f.out);
    return out.report.exit_code;
}

mckv::EmpiricalMeasure load_points(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw mckv::ConfigError("cannot open " + path);
    return mckv::read_points_csv(in);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"McKean-Vlasov order and positive-correlation toolkit"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string scenario_ref;
    const std::pair<const char*, const char*> battery_verbs[] = {
        {"run", "full battery: checks, simulate, tests, picard"},
        {"check", "structural coefficient checks only"},
        {"simulate", "particle simulation only"},
        {"picard", "Picard fixed-point iteration only"},
    };
    for (const auto& [name, help] : battery_verbs) {
        auto* cmd = app.add_subcommand(name, help);
        cmd->add_option("scenario", scenario_ref, "scenario JSON file or builtin name")->required();
        add_common(cmd, flags);
    }

    std::string lower_csv, upper_csv, points_csv;
    mckv::TestOptions topts;
    auto* order_cmd = app.add_subcommand("test-order", "test nu <= mu on two point clouds (CSV)");
    order_cmd->add_option("lower", lower_csv, "nu samples")->required();
    order_cmd->add_option("upper", upper_csv, "mu samples")->required();
    auto* fkg_cmd = app.add_subcommand("test-fkg", "test positive association of a point cloud (CSV)");
    fkg_cmd->add_option("points", points_csv, "samples")->required();
    for (auto* cmd : {order_cmd, fkg_cmd}) {
        cmd->add_option("--seed", topts.seed, "RNG seed");
        cmd->add_option("--alpha", topts.alpha, "test level")->capture_default_str();
        cmd->add_option("--n-boot", topts.n_boot, "bootstrap replicates")->capture_default_str();
    }

    std::string write_dir;
    auto* corpus_cmd = app.add_subcommand("corpus", "list builtin scenarios");
    corpus_cmd->add_option("--write", write_dir, "also write each scenario as DIR/<name>.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? mckv::kExitOk : mckv::kExitConfig;
    }

    try {
        for (const auto& [name, help] : battery_verbs) {
            if (!app.got_subcommand(name)) continue;
            const std::string verb = name;
            return run_battery(scenario_ref, flags, verb == "run" ? nullptr : name);
        }
        if (app.got_subcommand(order_cmd) || app.got_subcommand(fkg_cmd)) {
            nlohmann::json out;
            bool reject = false;
            if (app.got_subcommand(order_cmd)) {
                const auto nu = load_points(lower_csv);
                const auto mu = load_points(upper_csv);
                mckv::FamilySpec spec;
                spec.seed = topts.seed;
                spec.reference = &mu;
                const auto v = mckv::order_test(nu, mu, mckv::make_increasing_family(mu.dim(), spec), topts);
                out = v.to_json();
                reject = v.verdict == mckv::Verdict::kReject;
            } else {
                const auto mu = load_points(points_csv);
                mckv::FamilySpec spec = mckv::fkg_family_defaults(topts.seed);
                spec.reference = &mu;
                const auto v = mckv::fkg_test(mu, mckv::make_increasing_family(mu.dim(), spec), topts);
                out = v.to_json();
                reject = v.verdict == mckv::Verdict::kReject;
            }
            std::cout << out.dump(2) << '\n';
            return reject ? mckv::kExitRejected : mckv::kExitOk;
        }
        if (app.got_subcommand(corpus_cmd)) {
            for (const auto& cfg : mckv::builtin_scenario_configs()) {
                const auto& g = cfg.at("ground_truth");
                std::cout << cfg.at("name").get<std::string>()
                          << "  order=" << g.at("order_preserving").get<std::string>()
                          << "  fkg=" << g.at("fkg_preserving").get<std::string>() << "  "
                          << cfg.at("description").get<std::string>() << '\n';
                if (!write_dir.empty()) {
                    std::filesystem::create_directories(write_dir);
                    std::ofstream f(std::filesystem::path(write_dir) / (cfg.at("name").get<std::string>() + ".json"));
                    if (!f) throw mckv::Error("cannot write into " + write_dir);
                    f << cfg.dump(2) << '\n';
                }
            }
            return mckv::kExitOk;
        }
    } catch (const mckv::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return mckv::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return mckv::kExitRuntime;
    }
    return mckv::kExitOk;
}
