#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "wigner/dsl.hpp"

using namespace wigner;

namespace {

const char* kProtocol = R"(
# two labs, two outside observers
factor coin { heads, tails }
agent Fbar
factor spin { down, up }
agent F
agent Wbar
agent W

prepare 1/sqrt(3) heads*0*down*0*0*0 + sqrt(2/3) tails*0*down*0*0*0

basis wbar on coin*Fbar {
  okbar = 1/sqrt(2) heads*heads - 1/sqrt(2) tails*tails
  failbar = 1/sqrt(2) heads*heads + 1/sqrt(2) tails*tails
}
basis w on spin*F {
  OK = 1/sqrt(2) down*down - 1/sqrt(2) up*up
  fail = 1/sqrt(2) down*down + 1/sqrt(2) up*up
}

measure coin by Fbar as r
control Fbar : tails apply hadamard on spin
measure spin by F as z
measure wbar by Wbar as wbar
measure w by W as w

statement SQ_FBAR : certain(w=fail given r=tails) expect fails
statement SQ_W : possible(wbar=okbar, w=OK) expect holds
)";

}  // namespace

TEST_CASE("parsing and running the full protocol file") {
  ResolvedScenario rs = load_scenario(kProtocol, "proto");
  REQUIRE(rs.ok());
  const Scenario& sc = rs.scenario;
  CHECK(sc.space->dim() == 324);
  CHECK(sc.steps.size() == 5);
  REQUIRE(sc.statements.size() == 2);
  CHECK(sc.statements[0].expect == "FAILS");

  RunResult rr = run(sc);
  auto ww = rr.joint.marginal({"wbar", "w"});
  CHECK(ww.table.at({"okbar", "OK"}).p ==
        doctest::Approx(1.0 / 12).epsilon(1e-10));
  CHECK(ww.table.at({"failbar", "fail"}).p ==
        doctest::Approx(3.0 / 4).epsilon(1e-10));
  REQUIRE(ww.table.at({"okbar", "OK"}).p_exact.has_value());
  CHECK(*ww.table.at({"okbar", "OK"}).p_exact == Rational(1, 12));

  auto r0 = evaluate_statement_in_run(rr, sc.statements[0]);
  CHECK(r0.verdict == Verdict::kFails);
  auto r1 = evaluate_statement_in_run(rr, sc.statements[1]);
  CHECK(r1.verdict == Verdict::kHolds);
}

TEST_CASE("pretty-print round trip preserves the AST") {
  ParseResult first = parse_scenario(kProtocol);
  REQUIRE(first.ok());
  std::string printed = print_scenario(*first.doc);
  ParseResult second = parse_scenario(printed);
  REQUIRE(second.ok());
  CHECK(*first.doc == *second.doc);
  // printing is a fixed point
  CHECK(print_scenario(*second.doc) == printed);
}

TEST_CASE("diagnostics are deterministic") {
  const char* bad = R"(
factor coin { heads, tails }
prepare 0.5 heads
measure coin by Ghost
)";
  auto a = parse_scenario(bad);
  auto b = parse_scenario(bad);
  CHECK(!a.ok());
  REQUIRE(!a.diagnostics.empty());
  CHECK(a.diagnostics == b.diagnostics);
}

TEST_CASE("float literals are rejected with a hint") {
  auto r = parse_scenario("factor c { a, b }\nprepare 0.707 a\n");
  REQUIRE(!r.diagnostics.empty());
  CHECK(r.diagnostics[0].message.find("floating-point") != std::string::npos);
  CHECK(r.diagnostics[0].hint.find("sqrt") != std::string::npos);
  CHECK(r.diagnostics[0].line == 2);
}

TEST_CASE("non-orthonormal bases are reported with the offending pair") {
  const char* text = R"(
factor coin { heads, tails }
factor M { 0, u, v }
prepare 1 heads*0
basis B on coin {
  u = 1/sqrt(2) heads + 1/sqrt(2) heads
  v = 1 tails
}
measure B by M
)";
  ResolvedScenario rs = load_scenario(text);
  CHECK(!rs.ok());
  bool found = false;
  for (const auto& d : rs.diagnostics)
    if (d.message.find("<u|u>") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("empty input has no preparation") {
  ResolvedScenario rs = load_scenario("");
  CHECK(!rs.ok());
  REQUIRE(!rs.diagnostics.empty());
  CHECK(rs.diagnostics[0].message == "no preparation");
}

TEST_CASE("unknown identifiers are diagnosed") {
  const char* text = R"(
factor coin { heads, tails }
factor M { 0, heads, tails }
prepare 1 heads*0
measure dice by M
)";
  ResolvedScenario rs = load_scenario(text);
  CHECK(!rs.ok());
  CHECK(rs.diagnostics[0].message.find("dice") != std::string::npos);

  ResolvedScenario rs2 = load_scenario(
      "factor coin { heads, tails }\nagent A\nprepare 1 heads*0\n");
  CHECK(!rs2.ok());
  CHECK(rs2.diagnostics[0].message.find("never measures") !=
        std::string::npos);
}

TEST_CASE("amplitude literal forms") {
  const char* text = R"(
factor q { a, b }
factor M { 0, a, b }
prepare 1/2 a*0 + 3/4/sqrt(9) a*0 + sqrt(1/4) b*0 - 1/4 b*0
measure q by M
)";
  ParseResult pr = parse_scenario(text);
  REQUIRE(pr.ok());
  const auto* prep = std::get_if<DocPrepare>(&pr.doc->decls[2]);
  REQUIRE(prep != nullptr);
  REQUIRE(prep->terms.size() == 4);
  CHECK(prep->terms[0].coefficient == ExactAmp(Rational(1, 2)));
  // 3/4/sqrt(9) = 3/12 = 1/4
  CHECK(prep->terms[1].coefficient == ExactAmp(Rational(1, 4)));
  CHECK(prep->terms[2].coefficient == ExactAmp(Rational(1, 2)));
  CHECK(prep->terms[3].coefficient == ExactAmp(Rational(-1, 4)));
  // terms sum to (3/4, 1/4), then get normalized to (3, 1)/sqrt(10)
  ResolvedScenario rs = resolve_scenario(*pr.doc);
  REQUIRE(rs.ok());
  StateVector st = superpose(rs.scenario.space, rs.scenario.preparation);
  CHECK(st.amps[0].real() == doctest::Approx(3.0 / std::sqrt(10.0)));
}

TEST_CASE("collapse selection and options parse") {
  const char* text = R"(
option seed = 9
option kernel = minimal
factor coin { heads, tails }
agent M
prepare 1/sqrt(2) heads*0 + 1/sqrt(2) tails*0
measure coin by M as c collapse = tails
)";
  ResolvedScenario rs = load_scenario(text);
  REQUIRE(rs.ok());
  CHECK(rs.options.at("seed") == "9");
  CHECK(rs.options.at("kernel") == "minimal");
  REQUIRE(rs.scenario.steps.size() == 1);
  CHECK(rs.scenario.steps[0].collapse);
  CHECK(rs.scenario.steps[0].selected_outcome == "tails");
  RunResult rr = run(rs.scenario);
  CHECK(rr.normalization == doctest::Approx(0.5).epsilon(1e-12));

  ResolvedScenario bad = load_scenario(
      "option colour = blue\nfactor c { a, b }\n");
  CHECK(!bad.ok());
  CHECK(bad.diagnostics[0].message.find("colour") != std::string::npos);
}

TEST_CASE("statements over unrecorded variables warn but still load") {
  const char* text = R"(
factor coin { heads, tails }
agent M
prepare 1 heads*0
measure coin by M as c
statement GHOST : possible(x=1) expect vacuous
)";
  ResolvedScenario rs = load_scenario(text);
  REQUIRE(!rs.diagnostics.empty());
  CHECK(rs.diagnostics[0].severity == Diagnostic::Severity::kWarning);
  // warnings only: the scenario is still usable
  CHECK(!rs.scenario.statements.empty());
  RunResult rr = run(rs.scenario);
  CHECK(evaluate_statement_in_run(rr, rs.scenario.statements[0]).verdict ==
        Verdict::kVacuous);
}

TEST_CASE("variable defaults to the recorder name") {
  const char* text = R"(
factor coin { heads, tails }
agent M
prepare 1 tails*0
measure coin by M
statement T : certain(M=tails)
)";
  ResolvedScenario rs = load_scenario(text);
  REQUIRE(rs.ok());
  CHECK(rs.scenario.steps[0].variable == "M");
  RunResult rr = run(rs.scenario);
  CHECK(evaluate_statement_in_run(rr, rs.scenario.statements[0]).verdict ==
        Verdict::kHolds);
}

TEST_CASE("tensor symbol and ascii alias are interchangeable") {
  std::string a = "factor c { x, y }\nfactor d { u, v }\nprepare 1 x⊗u\n";
  std::string b = "factor c { x, y }\nfactor d { u, v }\nprepare 1 x*u\n";
  auto pa = parse_scenario(a);
  auto pb = parse_scenario(b);
  REQUIRE(pa.ok());
  REQUIRE(pb.ok());
  CHECK(*pa.doc == *pb.doc);
}
