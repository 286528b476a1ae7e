#include "flowlab/experiment.hpp"
#include "flowlab/svg.hpp"

#include "doctest.h"

#include <string>

using namespace flowlab;

namespace {

ErrorCode code_of(const std::string& text, std::string* message = nullptr) {
  try {
    run_experiment(text);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

const char* kAudit = R"J({
  "version": 1,
  "name": "unit-audit",
  "kind": "audit",
  "problem": {"preset": "ou(1)"},
  "params": {"kappa": 1, "points": 50, "pair_points": 10}
})J";

const char* kSimulate = R"J({
  "version": 1,
  "name": "unit-simulate",
  "kind": "simulate",
  "problem": {"preset": "ou(1)"},
  "simulation": {"dt": 0.01, "horizon": 0.5, "paths": 200, "seed": 4},
  "params": {"x0": 1, "schemes": ["tamed-euler"]}
})J";

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("syntax errors report line and column") {
    std::string msg;
    CHECK(code_of("{\n  \"version\": 1,\n  oops\n}", &msg) == ErrorCode::InvalidConfig);
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("column") != std::string::npos);
  }

  TEST_CASE("unknown fields and presets are rejected") {
    std::string msg;
    std::string text = kAudit;
    text.replace(text.find("\"params\""), 8, "\"parms\"");
    CHECK(code_of(text, &msg) == ErrorCode::InvalidConfig);
    CHECK(msg.find("parms") != std::string::npos);

    text = kAudit;
    text.replace(text.find("ou(1)"), 5, "lorenz(3)");
    CHECK(code_of(text) == ErrorCode::PresetNotFound);

    text = kAudit;
    text.replace(text.find("\"version\": 1"), 12, "\"version\": 2");
    CHECK(code_of(text) == ErrorCode::InvalidConfig);

    text = kAudit;
    text.replace(text.find("\"audit\""), 7, "\"dance\"");
    CHECK(code_of(text) == ErrorCode::InvalidConfig);
  }

  TEST_CASE("reports are byte-identical across runs") {
    const auto a = run_experiment(kAudit);
    const auto b = run_experiment(kAudit);
    CHECK(a.report_json == b.report_json);
    CHECK(a.verdict == Verdict::Pass);
    CHECK(a.report_json.find("\"schema\": \"flowlab-report/1\"") != std::string::npos);
  }

  TEST_CASE("overrides reach the simulation") {
    RunOverrides o;
    o.seed = 99;
    o.paths = 64;
    const auto a = run_experiment(kSimulate, o);
    CHECK(a.report_json.find("\"seed\": 99") != std::string::npos);
    CHECK(a.report_json.find("\"paths\": 64") != std::string::npos);
    CHECK(a.report_json != run_experiment(kSimulate).report_json);
  }

  TEST_CASE("plots re-render from the stored series") {
    const auto a = run_experiment(kSimulate);
    const auto plots = plots_from_report(a.report_json);
    REQUIRE(!plots.empty());
    for (const auto& [name, svg] : plots) {
      REQUIRE(a.files.count(name) == 1);
      CHECK(a.files.at(name) == svg);
    }
  }

  TEST_CASE("verdict combination and exit codes") {
    CHECK(combine(Verdict::Pass, Verdict::Pass) == Verdict::Pass);
    CHECK(combine(Verdict::Pass, Verdict::Unresolved) == Verdict::Inconclusive);
    CHECK(combine(Verdict::Inconclusive, Verdict::Fail) == Verdict::Fail);
    CHECK(combine(Verdict::Fail, Verdict::Pass) == Verdict::Fail);
    CHECK(exit_code(Verdict::Pass) == 0);
    CHECK(exit_code(Verdict::Fail) == 1);
    CHECK(exit_code(Verdict::Inconclusive) == 2);
    CHECK(exit_code(Verdict::UnverifiedPremise) == 2);
  }

  TEST_CASE("preset listing") {
    const std::string t = preset_table();
    for (const char* id : {"example1(beta)", "bm(d)", "ou(d)", "step-drift-1d", "degenerate-example1(gamma)"})
      CHECK(t.find(id) != std::string::npos);
  }

  TEST_CASE("svg output escapes markup and skips non-finite points") {
    Plot p;
    p.title = "a<b & c";
    p.series.push_back({"s\"1", {0, 1, 2}, {1, std::nan(""), 3}, {}, {}});
    const std::string s = render_svg(p);
    CHECK(s.find("a&lt;b &amp; c") != std::string::npos);
    CHECK(s.find("a<b") == std::string::npos);
    CHECK(s.find("nan") == std::string::npos);
    CHECK(s.rfind("<svg", 0) == 0);
    CHECK(render_svg(p) == s);
  }
}
