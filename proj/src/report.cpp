#include "mckv/report.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <openssl/evp.h>

#include "mckv/error.hpp"
#include "mckv/sim.hpp"
#include "mckv/stat_tests.hpp"
#include "mckv/test_functions.hpp"
#include "mckv/wasserstein.hpp"

namespace mckv {

nlohmann::json Report::to_json() const {
    return {{"schema_version", kSchemaVersion},
            {"scenario", scenario},
            {"checks", checks},
            {"tests", tests},
            {"picard", picard},
            {"timings", timings},
            {"seed", seed},
            {"exit_code", exit_code}};
}

Report Report::from_json(const nlohmann::json& j) {
    if (j.at("schema_version").get<int>() != kSchemaVersion) throw ConfigError("unsupported report schema version");
    Report r;
    r.scenario = j.at("scenario");
    r.checks = j.at("checks");
    r.tests = j.at("tests");
    r.picard = j.at("picard");
    r.timings = j.at("timings");
    r.seed = j.at("seed").get<std::uint64_t>();
    r.exit_code = j.at("exit_code").get<int>();
    return r;
}

std::string dump_report(const Report& r) { return r.to_json().dump(2) + "\n"; }

std::string git_blob_sha1(const std::string& content) {
    const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, header.data(), header.size()) != 1 ||
        EVP_DigestUpdate(ctx, content.data(), content.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("SHA-1 digest failed");
    }
    EVP_MD_CTX_free(ctx);
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

enum Property { kOrder = 1, kFkg = 2 };

nlohmann::json property_names(int mask) {
    nlohmann::json out = nlohmann::json::array();
    if (mask & kOrder) out.push_back("order");
    if (mask & kFkg) out.push_back("fkg");
    return out;
}

}  // namespace

RunOutput run_scenario(const Scenario& s, const RunOptions& opts) {
    RunOutput out;
    Report& rep = out.report;
    rep.seed = s.sim.seed;
    const Battery& b = s.battery;
    const int d = s.models.dim();

    auto relevant = [&](int mask) {
        if (!s.labelled) return true;
        return ((mask & kOrder) && s.order_label != Label::kUnknown) || ((mask & kFkg) && s.fkg_label != Label::kUnknown);
    };
    bool contradicted = false;

    std::size_t check_samples = 0, euler_particle_steps = 0, bootstrap_replicates = 0;
    nlohmann::json wall = nlohmann::json::object();

    nlohmann::json scenario = {{"config", s.to_json()}, {"ground_truth", nullptr}, {"predicted", nullptr},
                               {"label_mismatches", nlohmann::json::array()}};
    if (s.labelled) {
        scenario["ground_truth"] = {{"order_preserving", to_string(s.order_label)},
                                    {"fkg_preserving", to_string(s.fkg_label)}};
    }

    if (b.checks) {
        const auto start = Clock::now();
        CheckOptions co;
        co.n = b.check_samples;
        co.tol = b.tolerance;
        co.seed = s.sim.seed;
        co.particles = b.check_particles;
        co.box.t_lo = s.sim.s;
        co.box.t_hi = s.sim.T;
        const StructuralResult sr = run_structural_checks(s.models, co);
        std::map<std::string, int> membership;
        for (const auto& r : sr.order.sufficient) membership[r.id] |= kOrder;
        for (const auto& r : sr.order.necessary) membership[r.id] |= kOrder;
        for (const auto& r : sr.fkg.sufficient) membership[r.id] |= kFkg;
        for (const auto& r : sr.fkg.necessary) membership[r.id] |= kFkg;
        for (const auto& r : sr.reports) {
            nlohmann::json j = r.to_json();
            j["properties"] = property_names(membership[r.id]);
            rep.checks.push_back(std::move(j));
            check_samples += r.samples_used;
            if (!r.passed() && relevant(membership[r.id])) contradicted = true;
        }
        scenario["predicted"] = {{"order_preserving", to_string(sr.order.predicted)},
                                 {"fkg_preserving", to_string(sr.fkg.predicted)}};
        if (s.labelled) {
            const std::pair<const char*, std::pair<Label, Label>> props[] = {
                {"order_preserving", {s.order_label, sr.order.predicted}},
                {"fkg_preserving", {s.fkg_label, sr.fkg.predicted}}};
            for (const auto& [name, labels] : props) {
                if (labels.first != Label::kUnknown && labels.first != labels.second) {
                    scenario["label_mismatches"].push_back(name);
                    contradicted = true;
                }
            }
        }
        if (opts.wall_clock) wall["checks"] = seconds_since(start);
    }

    if (b.simulate || b.picard) {
        const CoupledClouds clouds = initial_coupling(s);
        if (b.simulate) {
            auto start = Clock::now();
            const std::size_t systems = s.has_lower_system() ? 2 : 1;
            euler_particle_steps += systems * clouds.upper.size() * s.sim.steps();
            std::vector<double> ordered_fraction;
            if (s.has_lower_system()) {
                CoupledRun run = coupled_order_run(s.models, clouds, s.sim);
                ordered_fraction = run.ordered_fraction;
                out.lower_ensemble = std::move(run.lower);
                out.upper_ensemble = std::move(run.upper);
            } else {
                out.upper_ensemble = simulate_mckean_vlasov(s.models.upper, clouds.upper, s.sim).ensemble;
            }
            if (opts.wall_clock) wall["simulate"] = seconds_since(start);

            if (b.tests) {
                start = Clock::now();
                const TestOptions to{b.n_boot, b.alpha, s.sim.seed};
                const PathEnsemble& up = *out.upper_ensemble;
                const std::size_t last = up.nodes() - 1;
                const EmpiricalMeasure upper_terminal = up.marginal(last);
                const std::string at_t = "[t=" + format_double(up.grid[last]) + "]";
                auto add_test = [&](const std::string& id, const char* kind, int property, nlohmann::json body,
                                    bool rejected) {
                    nlohmann::json j = {{"id", id}, {"kind", kind}, {"properties", property_names(property)}};
                    j.update(body);
                    rep.tests.push_back(std::move(j));
                    if (rejected && relevant(property)) contradicted = true;
                };

                if (out.lower_ensemble) {
                    const double worst = *std::min_element(ordered_fraction.begin(), ordered_fraction.end());
                    const bool low = worst < b.ordered_fraction_min;
                    add_test("ordered_fraction", "ordered_fraction", kOrder,
                             {{"verdict", low ? "REJECT" : "CONSISTENT"},
                              {"minimum", worst},
                              {"threshold", b.ordered_fraction_min},
                              {"per_checkpoint", ordered_fraction}},
                             low);

                    FamilySpec spec;
                    spec.seed = s.sim.seed;
                    spec.reference = &upper_terminal;
                    const OrderVerdict ov =
                        order_test(out.lower_ensemble->marginal(last), upper_terminal, make_increasing_family(d, spec), to);
                    bootstrap_replicates += static_cast<std::size_t>(b.n_boot);
                    add_test("order_test" + at_t, "order", kOrder, ov.to_json(), ov.verdict == Verdict::kReject);

                    if (b.path_tests) {
                        FamilySpec ps = fkg_family_defaults(s.sim.seed);
                        ps.reference = &upper_terminal;
                        const OrderVerdict pv =
                            path_order_test(*out.lower_ensemble, up, make_increasing_family(d, ps), to);
                        bootstrap_replicates += static_cast<std::size_t>(b.n_boot);
                        add_test("path_order_test", "path_order", kOrder, pv.to_json(), pv.verdict == Verdict::kReject);
                    }
                }

                FamilySpec fs = fkg_family_defaults(s.sim.seed);
                fs.reference = &upper_terminal;
                const FkgVerdict fv = fkg_test(upper_terminal, make_increasing_family(d, fs), to);
                bootstrap_replicates += static_cast<std::size_t>(b.n_boot);
                add_test("fkg_test" + at_t, "fkg", kFkg, fv.to_json(), fv.verdict == Verdict::kReject);

                if (b.path_tests) {
                    FamilySpec ps;
                    ps.orthants = 0;
                    ps.sigmoids = 2;
                    ps.seed = s.sim.seed;
                    ps.reference = &upper_terminal;
                    const FkgVerdict pv = path_fkg_test(up, make_increasing_family(d, ps), to);
                    bootstrap_replicates += static_cast<std::size_t>(b.n_boot);
                    add_test("path_fkg_test", "path_fkg", kFkg, pv.to_json(), pv.verdict == Verdict::kReject);
                }
                if (opts.wall_clock) wall["tests"] = seconds_since(start);
            }
        }
        if (b.picard) {
            const auto start = Clock::now();
            PicardOptions po = b.picard_options;
            po.keep_iterates = false;
            PicardResult pr = picard_solve(s.models.upper, clouds.upper, s.sim, po);
            euler_particle_steps += static_cast<std::size_t>(pr.trace.iterations) * clouds.upper.size() * s.sim.steps();
            nlohmann::json pj = pr.trace.to_json();
            if (out.upper_ensemble) {
                const EmpiricalMeasure particle_terminal = out.upper_ensemble->marginal(out.upper_ensemble->nodes() - 1);
                pj["w2_terminal_vs_particles"] =
                    w2(pr.flow.nodes.back(), particle_terminal, W2Method::sliced(128, s.sim.seed));
            }
            rep.picard = std::move(pj);
            out.picard_flow = std::move(pr.flow);
            if (opts.wall_clock) wall["picard"] = seconds_since(start);
        }
    }

    rep.scenario = std::move(scenario);
    rep.timings = {{"mode", opts.wall_clock ? "wall_clock" : "counters"},
                   {"check_samples", check_samples},
                   {"euler_particle_steps", euler_particle_steps},
                   {"bootstrap_replicates", bootstrap_replicates}};
    if (opts.wall_clock) rep.timings["wall_seconds"] = wall;
    rep.exit_code = contradicted ? kExitRejected : kExitOk;
    return out;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << content;
    if (!f) throw Error("write failed for " + path.string());
}

}  // namespace

void emit_report(const RunOutput& run, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir + ": " + ec.message());

    std::map<std::string, std::string> files;
    auto flow_csv = [](const MeasureFlow& f) {
        std::ostringstream os;
        write_flow_csv(os, f);
        return os.str();
    };
    auto ensemble_csv = [](const PathEnsemble& e) {
        std::ostringstream os;
        write_ensemble_csv(os, e);
        return os.str();
    };
    if (run.upper_ensemble) {
        files["ensembles/upper.csv"] = ensemble_csv(*run.upper_ensemble);
        files["flows/upper.csv"] = flow_csv(run.upper_ensemble->flow());
    }
    if (run.lower_ensemble) {
        files["ensembles/lower.csv"] = ensemble_csv(*run.lower_ensemble);
        files["flows/lower.csv"] = flow_csv(run.lower_ensemble->flow());
    }
    if (run.picard_flow) files["flows/picard.csv"] = flow_csv(*run.picard_flow);
    files["report.json"] = dump_report(run.report);

    nlohmann::json digests = nlohmann::json::object();
    for (const auto& [name, content] : files) {
        const fs::path p = fs::path(dir) / name;
        fs::create_directories(p.parent_path(), ec);
        if (ec) throw Error("cannot create " + p.parent_path().string() + ": " + ec.message());
        write_file(p, content);
        digests[name] = git_blob_sha1(content);
    }

    const nlohmann::json& config = run.report.scenario.at("config");
    nlohmann::json models = {{"model", git_blob_sha1(config.at("model").dump())}};
    if (config.contains("model_bar")) models["model_bar"] = git_blob_sha1(config.at("model_bar").dump());
    const nlohmann::json manifest = {{"schema_version", kSchemaVersion},
                                     {"scenario", config.at("name")},
                                     {"config", config},
                                     {"config_digest", git_blob_sha1(config.dump())},
                                     {"model_digests", models},
                                     {"seeds", {{"sim", run.report.seed}, {"checks", run.report.seed}, {"bootstrap", run.report.seed}}},
                                     {"files", digests}};
    write_file(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace mckv
