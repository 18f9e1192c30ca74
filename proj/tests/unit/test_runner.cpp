#include <doctest.h>

#include <cmath>
#include <string>

#include "kam/runner.hpp"

using namespace kam;

namespace {

json minimal_config() {
    return json::parse(R"({
        "degree": 12,
        "instance": {"type": "surface", "gamma": 1.379884, "f": [[3, 0, 0.1], [0, 3, 0.1]]}
    })");
}

std::string config_message(const json& j) {
    try {
        config_from_json(j);
    } catch (const KamError& e) {
        CHECK(e.kind() == ErrorKind::Config);
        return e.what();
    }
    FAIL("config was accepted");
    return {};
}

bool contains(const std::string& s, const std::string& needle) { return s.find(needle) != std::string::npos; }

}  // namespace

TEST_CASE("config parsing and round trip") {
    const RunConfig c = config_from_json(minimal_config());
    CHECK(c.is_surface);
    CHECK(c.f.size() == 2);
    CHECK(c.mode == Mode::Practical);
    const RunConfig again = config_from_json(config_to_json(c));
    CHECK(config_to_json(again) == config_to_json(c));

    json pair = minimal_config();
    pair["instance"] = json::parse(R"({"type": "pair", "alpha": [2.4, 1.0], "p": [[2, 0, 0.01, 0.02]]})");
    const RunConfig pc = config_from_json(pair);
    CHECK_FALSE(pc.is_surface);
    CHECK(pc.p[0].value == cplx{0.01, 0.02});
}

TEST_CASE("config errors name the offending field") {
    json j = minimal_config();
    j["instance"]["gamma"] = 0.4;
    CHECK(contains(config_message(j), "config.instance.gamma"));
    j = minimal_config();
    j["omega"] = {{"window_fraction", 0.5}};
    CHECK(contains(config_message(j), "config.omega.window_fraction"));
    j = minimal_config();
    j["mode"] = "fast";
    CHECK(contains(config_message(j), "config.mode"));
    j = minimal_config();
    j["instance"]["f"] = json::parse("[[3, 0, 0.1], [1, 1, 0.2]]");
    CHECK(contains(config_message(j), "config.instance.f[1]"));
    j = minimal_config();
    j["instance"]["f"] = json::parse(R"([[3, 0, "x"]])");
    CHECK(contains(config_message(j), "config.instance.f[0][2]"));
    j = minimal_config();
    j.erase("instance");
    CHECK(contains(config_message(j), "instance"));
    j = minimal_config();
    j["degree"] = 6;
    CHECK(contains(config_message(j), "config.degree"));
    j = minimal_config();
    j["tolerances"] = {{"realness", -1.0}};
    CHECK(contains(config_message(j), "config.tolerances.realness"));
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), KamError);
}

TEST_CASE("bundled fixtures") {
    CHECK(fixture_names() == std::vector<std::string>{"linear", "cubic"});
    CHECK(fixture_config("cubic").f.size() == 4);
    CHECK(fixture_config("linear").f.empty());
    CHECK_THROWS_AS(fixture_config("quartic"), KamError);
    CHECK_THROWS_AS(series_from_terms({{5, 5, 1.0}}, 8), KamError);
}

TEST_CASE("the linear fixture exits immediately with exact curves") {
    const RunOutput out = run_all(fixture_config("linear"));
    CHECK(out.prep.trivial);
    CHECK(out.state.status == "unperturbed");
    CHECK(out.state.chain.empty());
    const double lambda = out.prep.original.lambda();
    REQUIRE(out.curves.size() >= 5);
    for (const auto& c : out.curves) {
        CHECK(c.conjugacy_residual < 1e-15);
        CHECK(c.equivariance_residual == 0.0);
        CHECK(c.mu_omega == doctest::Approx(lambda).epsilon(1e-15));
    }
    for (const auto& d : out.smoothness.differences)
        for (double v : d) CHECK(std::abs(v) < 1e-12);
    for (const auto& e : verify_suite(out)) CHECK_MESSAGE(e.passed(), e.name);
}

TEST_CASE("the cubic fixture is nondegenerate with s = 1") {
    const Preparation prep = prepare(fixture_config("cubic"));
    CHECK_FALSE(prep.trivial);
    CHECK_FALSE(prep.nondeg.degenerate);
    CHECK(prep.nondeg.s == 1);
    CHECK(prep.alpha0_lambda < 0.25);
    CHECK(prep.deck_residual < 1e-12);
    CHECK(prep.r0 > 0.0);
}

TEST_CASE("smoothness diagnostic") {
    std::vector<CurveResult> rs(4);
    for (int k = 0; k < 4; ++k) {
        rs[static_cast<std::size_t>(k)].omega = 0.001 * (k + 1);
        rs[static_cast<std::size_t>(k)].mu_omega = 2.0 + 0.001 * (k + 1);
    }
    const SmoothnessTable t = smoothness_diagnostic(rs);
    REQUIRE(t.differences.size() == 3);
    for (double v : t.differences[0]) CHECK(v == doctest::Approx(1.0));
    for (double v : t.differences[1]) CHECK(std::abs(v) < 1e-9);
    CHECK(t.lipschitz == doctest::Approx(1.0));
    rs.resize(1);
    CHECK_THROWS_AS(smoothness_diagnostic(rs), KamError);
}

TEST_CASE("reports are deterministic") {
    const RunConfig cfg = fixture_config("linear");
    const std::string a = report_json(run_all(cfg)).dump(2);
    const std::string b = report_json(run_all(cfg)).dump(2);
    CHECK(a == b);
    CHECK(contains(a, "\"verify\""));
}
