#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "mckv/error.hpp"
#include "mckv/report.hpp"
#include "mckv/scenario.hpp"

using namespace mckv;
namespace fs = std::filesystem;

namespace {

Overrides small() {
    Overrides o;
    o.particles = 500;
    o.samples = 500;
    o.dt = 0.01;
    return o;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("mckv_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cli(const std::string& args) {
    const std::string cmd = std::string(MCKV_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("builtin corpus") {
    const auto all = builtin_scenarios();
    CHECK(all.size() >= 8);
    std::set<std::string> names;
    bool has_no = false, has_yes = false;
    for (const auto& s : all) {
        CHECK(s.labelled);
        names.insert(s.name);
        has_no = has_no || s.order_label == Label::kNo;
        has_yes = has_yes || s.order_label == Label::kYes;
    }
    CHECK(names.size() == all.size());
    CHECK(has_no);
    CHECK(has_yes);
    CHECK(builtin_scenario("mkv-ou-1d").models.dim() == 1);
    CHECK_THROWS_AS(builtin_scenario("no-such-scenario"), ConfigError);
}

TEST_CASE("scenario configs round trip through JSON") {
    for (const auto& cfg : builtin_scenario_configs()) {
        const Scenario s = parse_scenario(cfg);
        const Scenario back = parse_scenario(s.to_json());
        CHECK(back.to_json() == s.to_json());
    }
}

TEST_CASE("malformed configs are configuration errors") {
    auto cfg = builtin_scenario_config("mkv-ou-1d");
    auto bad_key = cfg;
    bad_key["unexpected"] = 1;
    CHECK_THROWS_AS(parse_scenario(bad_key), ConfigError);
    auto bad_expr = cfg;
    bad_expr["model"]["drift"][0] = "-x1 +";
    CHECK_THROWS_AS(parse_scenario(bad_expr), ConfigError);
    auto bad_label = cfg;
    bad_label["ground_truth"]["order_preserving"] = "maybe";
    CHECK_THROWS_AS(parse_scenario(bad_label), ConfigError);
    auto bad_type = cfg;
    bad_type["sim"]["dt"] = "small";
    CHECK_THROWS_AS(parse_scenario(bad_type), ConfigError);

    const auto dir = scratch("malformed");
    std::ofstream(dir / "broken.json") << "{ \"name\": ";
    CHECK_THROWS_AS(load_scenario((dir / "broken.json").string()), ConfigError);
    CHECK_THROWS_AS(load_scenario((dir / "missing.json").string()), ConfigError);
}

TEST_CASE("overrides replace config values") {
    Overrides o;
    o.seed = 77;
    o.particles = 123;
    o.horizon = 0.5;
    const auto s = builtin_scenario("mkv-ou-1d", o);
    CHECK(s.sim.seed == 77);
    CHECK(s.sim.particles == 123);
    CHECK(s.sim.T == 0.5);
}

TEST_CASE("report JSON round trip") {
    const auto out = run_scenario(builtin_scenario("mkv-ou-1d", small()));
    const auto j = out.report.to_json();
    for (const char* key : {"schema_version", "scenario", "checks", "tests", "picard", "timings", "seed", "exit_code"}) {
        CHECK(j.contains(key));
    }
    CHECK(Report::from_json(j) == out.report);
    CHECK(Report::from_json(nlohmann::json::parse(dump_report(out.report))) == out.report);
    CHECK(out.report.exit_code == kExitOk);
}

TEST_CASE("reruns are byte-identical") {
    const auto a = scratch("rerun_a");
    const auto b = scratch("rerun_b");
    emit_report(run_scenario(builtin_scenario("brownian-negcorr", small())), a.string());
    emit_report(run_scenario(builtin_scenario("brownian-negcorr", small())), b.string());
    std::size_t files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        ++files;
        const auto rel = fs::relative(entry.path(), a);
        CHECK(slurp(entry.path()) == slurp(b / rel));
    }
    CHECK(files >= 4);
    const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
    CHECK(manifest.at("files").at("report.json") == git_blob_sha1(slurp(a / "report.json")));
}

TEST_CASE("git blob digests") {
    CHECK(git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("CLI exit codes") {
    const auto dir = scratch("cli");
    const std::string flags = " --particles 500 --samples 500 --dt 0.01 --out " + (dir / "out").string();
    CHECK(cli("run mkv-ou-1d" + flags) == 0);
    CHECK(cli("run order-violating-skew" + flags) == 1);
    std::ofstream(dir / "broken.json") << "{ not json";
    CHECK(cli("run " + (dir / "broken.json").string() + flags) == 2);
    CHECK(cli("run no-such-scenario" + flags) == 2);
    CHECK(cli("run mkv-ou-1d --particles banana") == 2);
    CHECK(cli("corpus") == 0);

    {
        std::ofstream lo(dir / "lo.csv"), hi(dir / "hi.csv");
        lo << "x1\n";
        hi << "x1\n";
        for (int k = 0; k < 200; ++k) {
            lo << k / 200.0 << '\n';
            hi << 1.0 + k / 200.0 << '\n';
        }
    }
    CHECK(cli("test-order " + (dir / "lo.csv").string() + " " + (dir / "hi.csv").string()) == 0);
    CHECK(cli("test-order " + (dir / "hi.csv").string() + " " + (dir / "lo.csv").string()) == 1);
}
