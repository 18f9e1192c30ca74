// Command-line driver: build, prenorm, iterate, sieve, curves, verify, report.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kam/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitStructural = 2;
constexpr int kExitConfig = 3;

struct Options {
    std::string config_path;
    std::string mode;
    int max_nu = -1;
    int degree = -1;
    std::string out_dir;
    std::string fixture;
};

kam::RunConfig resolve_config(const Options& o) {
    kam::RunConfig cfg;
    std::string path = o.config_path;
    if (const char* env = std::getenv("KAM_CONFIG"); env && *env) path = env;
    if (!o.fixture.empty())
        cfg = kam::fixture_config(o.fixture);
    else if (!path.empty())
        cfg = kam::load_config(path);
    else
        throw kam::KamError(kam::ErrorKind::Config, "no configuration: pass --config, --seed-fixture or set KAM_CONFIG");
    kam::json j = kam::config_to_json(cfg);
    if (!o.mode.empty()) j["mode"] = o.mode;
    if (o.max_nu >= 0) j["max_nu"] = o.max_nu;
    if (o.degree >= 0) j["degree"] = o.degree;
    if (!o.out_dir.empty()) j["output_dir"] = o.out_dir;
    return kam::config_from_json(j);
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw kam::KamError(kam::ErrorKind::Config, "cannot write '" + p.string() + "'");
    f << text;
}

int run(const std::string& cmd, const Options& o) {
    const kam::RunConfig cfg = resolve_config(o);
    const std::filesystem::path dir = cfg.output_dir;
    write_text(dir / "config.json", kam::config_to_json(cfg).dump(2) + "\n");

    if (cmd == "build") {
        const kam::Preparation prep = kam::prepare(cfg);
        kam::json j = {{"mode", kam::to_string(cfg.mode)},
                       {"lambda", prep.original.lambda()},
                       {"alpha", kam::to_json(prep.original.alpha)},
                       {"p", kam::to_json(prep.original.p)},
                       {"q", kam::to_json(prep.original.q)},
                       {"deck_residual", prep.deck_residual}};
        write_text(dir / "pair.json", j.dump(2) + "\n");
        std::printf("lambda = %.17g, deck residual = %.3e\n", prep.original.lambda(), prep.deck_residual);
        return kExitOk;
    }
    if (cmd == "prenorm") {
        const kam::Preparation prep = kam::prepare(cfg);
        kam::RunOutput out;
        out.prep = prep;
        out.state = kam::initial_state(prep);
        kam::json j = kam::report_json(out);
        write_text(dir / "prenormal.json",
                   kam::json{{"mode", j["mode"]}, {"prenormal", j["prenormal"]}, {"radius", j["radius"]}}.dump(2) +
                       "\n");
        std::printf("s = %d, r_* = %.6g, branch = %s\n", prep.prepared.s_order, prep.radius.r_star,
                    kam::to_string(prep.radius.branch));
        return kExitOk;
    }

    const bool curves = cmd == "curves" || cmd == "verify" || cmd == "report";
    const kam::RunOutput out = kam::run_all(cfg, curves);
    if (cmd == "iterate") {
        write_text(dir / "steps.csv", kam::steps_csv(out.state));
        write_text(dir / "run_report.json", kam::report_json(out).dump(2) + "\n");
    } else if (cmd == "sieve") {
        write_text(dir / "sieve.csv", kam::sieve_csv(out.state));
        write_text(dir / "run_report.json", kam::report_json(out).dump(2) + "\n");
    } else {
        kam::write_outputs(out, dir.string());
    }
    std::printf("status = %s, rounds = %d\n", out.state.status.c_str(), out.state.nu);
    if (!out.state.failure.empty()) std::printf("failure: %s\n", out.state.failure.c_str());
    if (cmd == "verify") {
        bool ok = true;
        for (const auto& e : kam::verify_suite(out)) {
            std::printf("%-24s %.3e  bound %.3e  %s\n", e.name.c_str(), e.measured, e.bound,
                        e.passed() ? "ok" : "FAIL");
            ok = ok && e.passed();
        }
        return ok ? kExitOk : kExitStructural;
    }
    const bool failed = out.state.status == "step-failed" || out.state.status == "empty-parameter-set";
    return failed ? kExitFailure : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Holomorphic hyperbolas of real analytic surfaces near a hyperbolic complex tangent"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config_path, "configuration file (JSON); KAM_CONFIG overrides");
    app.add_option("--mode", o.mode, "practical or rigorous")->check(CLI::IsMember({"practical", "rigorous"}));
    app.add_option("--max-nu", o.max_nu, "number of iteration rounds")->check(CLI::NonNegativeNumber);
    app.add_option("--degree", o.degree, "total truncation degree D")->check(CLI::PositiveNumber);
    app.add_option("--out", o.out_dir, "output directory");
    app.add_option("--seed-fixture", o.fixture, "use a bundled fixture (linear, cubic) as the configuration");
    for (const char* name : {"build", "prenorm", "iterate", "sieve", "curves", "verify", "report"})
        app.add_subcommand(name);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        return run(cmd, o);
    } catch (const kam::KamError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        switch (e.kind()) {
            case kam::ErrorKind::Config: return kExitConfig;
            case kam::ErrorKind::Structural: return kExitStructural;
            default: return kExitFailure;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    }
}
