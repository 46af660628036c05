#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "wigner/fr.hpp"

using namespace wigner;

namespace {

RunResult run_config(const std::string& name) {
  for (const auto& c : fr_suite_configs())
    if (c.name == name) return run(build_fr_scenario(c.options));
  throw error("no config " + name);
}

Verdict verdict_of(const RunResult& rr, const Statement& s) {
  return evaluate_statement_in_run(rr, s).verdict;
}

}  // namespace

TEST_CASE("no-collapse run reproduces the golden super-observer joint") {
  RunResult rr = run_config("no-collapse");
  CHECK(rr.variables == std::vector<std::string>{"r", "z", "wbar", "w"});
  CHECK(rr.joint.total() == doctest::Approx(1.0).epsilon(1e-10));

  auto ww = rr.joint.marginal({"wbar", "w"});
  CHECK(ww.table.at({"okbar", "OK"}).p ==
        doctest::Approx(1.0 / 12).epsilon(1e-10));
  CHECK(ww.table.at({"okbar", "fail"}).p ==
        doctest::Approx(1.0 / 12).epsilon(1e-10));
  CHECK(ww.table.at({"failbar", "OK"}).p ==
        doctest::Approx(1.0 / 12).epsilon(1e-10));
  CHECK(ww.table.at({"failbar", "fail"}).p ==
        doctest::Approx(3.0 / 4).epsilon(1e-10));
  REQUIRE(ww.table.at({"failbar", "fail"}).p_exact.has_value());
  CHECK(*ww.table.at({"failbar", "fail"}).p_exact == Rational(3, 4));

  // fully coherent: a single branch with the final state available
  CHECK(rr.branches.size() == 1);
  CHECK(rr.final_state.has_value());
  CHECK(rr.normalization == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("no-collapse verdicts: the friend's certainty is the one that breaks") {
  RunResult rr = run_config("no-collapse");

  auto fbar = evaluate_statement_in_run(rr, sq_fbar());
  CHECK(fbar.verdict == Verdict::kFails);
  // both super-observers have measured by the time w exists, and their
  // measurements rewrite the coin memory: the conditional drops to 5/6
  CHECK(fbar.probability == doctest::Approx(5.0 / 6).epsilon(1e-9));
  CHECK(fbar.condition_probability == doctest::Approx(0.5).epsilon(1e-9));

  auto wbar = evaluate_statement_in_run(rr, sq_wbar());
  CHECK(wbar.verdict == Verdict::kHolds);
  CHECK(wbar.probability == doctest::Approx(1.0).epsilon(1e-9));

  auto w = evaluate_statement_in_run(rr, sq_w());
  CHECK(w.verdict == Verdict::kHolds);
  CHECK(w.probability == doctest::Approx(1.0 / 12).epsilon(1e-9));

  // w and r are both final-step records here, so the sliced evaluation
  // agrees with the end-of-run joint
  auto from_end = evaluate_statement(rr.joint, sq_fbar());
  CHECK(from_end.probability ==
        doctest::Approx(fbar.probability).epsilon(1e-10));
}

TEST_CASE("collapse at the first friend restores her certainty") {
  RunResult rr = run_config("collapse-Fbar");
  // conditioned on r = tails
  CHECK(rr.normalization == doctest::Approx(2.0 / 3).epsilon(1e-10));
  for (const auto& [key, e] : rr.joint.table)
    CHECK(key[rr.joint.var_index("r")] == "tails");
  // from the collapsed tails laboratory the spin observer always sees fail
  CHECK(rr.joint.prob_of({{"w", "fail"}}) ==
        doctest::Approx(1.0).epsilon(1e-10));
  CHECK(rr.joint.prob_of({{"wbar", "okbar"}}) ==
        doctest::Approx(0.5).epsilon(1e-10));

  CHECK(verdict_of(rr, sq_fbar()) == Verdict::kHolds);
  CHECK(verdict_of(rr, sq_wbar()) == Verdict::kFails);
  CHECK(verdict_of(rr, sq_w()) == Verdict::kFails);
  auto wbar = evaluate_statement_in_run(rr, sq_wbar());
  CHECK(wbar.probability == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("collapse at both friends") {
  RunResult rr = run_config("collapse-Fbar-F");
  CHECK(rr.normalization == doctest::Approx(1.0 / 3).epsilon(1e-10));
  // |tails, up> sends both super-observers to uniform outcomes
  auto ww = rr.joint.marginal({"wbar", "w"});
  for (const auto& wb : {"okbar", "failbar"})
    for (const auto& w : {"OK", "fail"})
      CHECK(ww.table.at({wb, w}).p == doctest::Approx(0.25).epsilon(1e-10));

  CHECK(verdict_of(rr, sq_fbar()) == Verdict::kFails);
  CHECK(verdict_of(rr, sq_wbar()) == Verdict::kHolds);
  CHECK(verdict_of(rr, sq_w()) == Verdict::kHolds);
}

TEST_CASE("collapse at every agent gives the textbook joint") {
  RunResult rr = run_config("all-collapse");
  CHECK(rr.normalization == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(rr.branches.size() == 12);  // 3 friend outcomes x 2 x 2
  CHECK(!rr.final_state.has_value());

  auto rz = rr.joint.marginal({"r", "z"});
  CHECK(rz.table.at({"heads", "down"}).p ==
        doctest::Approx(1.0 / 3).epsilon(1e-10));
  CHECK(rz.table.at({"tails", "down"}).p ==
        doctest::Approx(1.0 / 3).epsilon(1e-10));
  CHECK(rz.table.at({"tails", "up"}).p ==
        doctest::Approx(1.0 / 3).epsilon(1e-10));
  CHECK(rz.table.count({"heads", "up"}) == 0);
  // every collapsed laboratory looks maximally random to its super-observer
  auto ww = rr.joint.marginal({"wbar", "w"});
  for (const auto& wb : {"okbar", "failbar"})
    for (const auto& w : {"OK", "fail"})
      CHECK(ww.table.at({wb, w}).p == doctest::Approx(0.25).epsilon(1e-10));
  REQUIRE(ww.table.at({"okbar", "OK"}).p_exact.has_value());
  CHECK(*ww.table.at({"okbar", "OK"}).p_exact == Rational(1, 4));

  CHECK(verdict_of(rr, sq_fbar()) == Verdict::kFails);
  CHECK(verdict_of(rr, sq_wbar()) == Verdict::kFails);
  CHECK(verdict_of(rr, sq_w()) == Verdict::kHolds);
  auto wbar = evaluate_statement_in_run(rr, sq_wbar());
  CHECK(wbar.probability == doctest::Approx(1.0 / 3).epsilon(1e-9));
}

TEST_CASE("the coin super-observer measures before the friend") {
  RunResult rr = run_config("Wbar-before-Fbar");
  // P(okbar) = 1/6 against the still-coherent coin, then tails with 1/2
  CHECK(rr.normalization == doctest::Approx(1.0 / 12).epsilon(1e-10));
  // conditioned on okbar then tails, the last measurement is a coin flip
  CHECK(rr.joint.prob_of({{"w", "OK"}}) ==
        doctest::Approx(0.5).epsilon(1e-10));
  CHECK(rr.joint.prob_of({{"w", "fail"}}) ==
        doctest::Approx(0.5).epsilon(1e-10));

  CHECK(verdict_of(rr, sq_fbar()) == Verdict::kFails);
  CHECK(verdict_of(rr, sq_wbar()) == Verdict::kHolds);
  CHECK(verdict_of(rr, sq_w()) == Verdict::kHolds);
}

TEST_CASE("without the coin super-observer the friend's certainty is safe") {
  RunResult rr = run_config("W-without-Wbar");
  CHECK(rr.variables == std::vector<std::string>{"r", "z", "w"});
  auto rw = rr.joint.marginal({"r", "w"});
  CHECK(rw.table.at({"heads", "OK"}).p ==
        doctest::Approx(1.0 / 6).epsilon(1e-10));
  CHECK(rw.table.at({"heads", "fail"}).p ==
        doctest::Approx(1.0 / 6).epsilon(1e-10));
  CHECK(rw.table.at({"tails", "fail"}).p ==
        doctest::Approx(2.0 / 3).epsilon(1e-10));
  CHECK(rw.prob_of({{"r", "tails"}, {"w", "OK"}}) ==
        doctest::Approx(0.0).epsilon(1e-12));
  REQUIRE(rw.table.at({"tails", "fail"}).p_exact.has_value());
  CHECK(*rw.table.at({"tails", "fail"}).p_exact == Rational(2, 3));

  CHECK(verdict_of(rr, sq_fbar()) == Verdict::kHolds);
  // statements about the absent observer are vacuous, not false
  CHECK(verdict_of(rr, sq_wbar()) == Verdict::kVacuous);
  CHECK(verdict_of(rr, sq_w()) == Verdict::kVacuous);
}

TEST_CASE("no configuration satisfies all three claims at once") {
  MatrixReport rep = statement_matrix(fr_suite(), table_ii_statements());
  CHECK(rep.rows.size() == 6);
  CHECK(!rep.has_all_holds_row());
  // sanity on the serialized form
  auto j = rep.to_json();
  CHECK(j["all_holds_row"] == false);
  CHECK(j["rows"].size() == 6);
  CHECK(rep.to_text().find("configuration") == 0);
}

TEST_CASE("mixing the favorable configurations fakes a contradiction") {
  MatrixRow row = mixed_mode_row();
  REQUIRE(row.results.size() == 3);
  for (const auto& r : row.results) CHECK(r.verdict == Verdict::kHolds);
}

TEST_CASE("a which-path record decoheres the coin super-observer") {
  FrOptions o;
  o.hidden_qubit = true;
  RunResult rr = run(build_fr_scenario(o));
  auto ww = rr.joint.marginal({"wbar", "w"});
  CHECK(ww.table.at({"okbar", "OK"}).p ==
        doctest::Approx(1.0 / 12).epsilon(1e-10));
  CHECK(ww.table.at({"okbar", "fail"}).p ==
        doctest::Approx(5.0 / 12).epsilon(1e-10));
  CHECK(ww.table.at({"failbar", "OK"}).p ==
        doctest::Approx(1.0 / 12).epsilon(1e-10));
  CHECK(ww.table.at({"failbar", "fail"}).p ==
        doctest::Approx(5.0 / 12).epsilon(1e-10));
  // the joint okbar & OK outcome only occurs alongside a heads record
  CHECK(rr.joint.prob_of({{"wbar", "okbar"}, {"w", "OK"}, {"gbar", "h"}}) ==
        doctest::Approx(1.0 / 12).epsilon(1e-10));
  CHECK(rr.joint.prob_of({{"wbar", "okbar"}, {"w", "OK"}, {"gbar", "t"}}) ==
        doctest::Approx(0.0).epsilon(1e-12));

  // the extra record destroys the second certainty as well
  auto wbar = evaluate_statement_in_run(rr, sq_wbar());
  CHECK(wbar.verdict == Verdict::kFails);
  CHECK(wbar.probability == doctest::Approx(1.0 / 3).epsilon(1e-9));
  CHECK(verdict_of(rr, sq_w()) == Verdict::kHolds);
}

TEST_CASE("statement evaluation on explicit distributions") {
  JointDistribution j;
  j.variables = {"a", "b"};
  j.add({"x", "u"}, 0.5, Rational(1, 2));
  j.add({"x", "v"}, 0.25, Rational(1, 4));
  j.add({"y", "v"}, 0.25, Rational(1, 4));

  Statement certain;
  certain.id = "C";
  certain.form = Statement::Form::kCertain;
  certain.event.equals = {{"b", "v"}};
  certain.condition = Predicate{{{"a", "y"}}};
  auto r = evaluate_statement(j, certain);
  CHECK(r.verdict == Verdict::kHolds);
  CHECK(r.probability == doctest::Approx(1.0));
  CHECK(r.condition_probability == doctest::Approx(0.25));

  certain.condition = Predicate{{{"a", "x"}}};
  r = evaluate_statement(j, certain);
  CHECK(r.verdict == Verdict::kFails);
  CHECK(r.probability == doctest::Approx(1.0 / 3));

  // impossible condition: vacuous, not false
  certain.condition = Predicate{{{"a", "z"}}};
  CHECK(evaluate_statement(j, certain).verdict == Verdict::kVacuous);

  Statement possible;
  possible.id = "P";
  possible.form = Statement::Form::kPossible;
  possible.event.equals = {{"a", "y"}, {"b", "u"}};
  CHECK(evaluate_statement(j, possible).verdict == Verdict::kFails);
  possible.event.equals = {{"a", "y"}, {"b", "v"}};
  CHECK(evaluate_statement(j, possible).verdict == Verdict::kHolds);

  // a statement over an unrecorded variable is vacuous
  possible.event.equals = {{"c", "w"}};
  CHECK(evaluate_statement(j, possible).verdict == Verdict::kVacuous);
}

TEST_CASE("postselecting a coherent step is rejected") {
  FrOptions o;
  o.collapse_at = {"Fbar"};
  o.postselect = {{"z", "up"}};  // F does not collapse
  CHECK_THROWS_WITH(build_fr_scenario(o),
                    doctest::Contains("non-collapsing"));
  FrOptions bad;
  bad.collapse_at = {"Ghost"};
  CHECK_THROWS_WITH(build_fr_scenario(bad),
                    doctest::Contains("unknown collapsing agent"));
}

TEST_CASE("run joints are normalized and agree with marginal sums") {
  for (const auto& c : fr_suite_configs()) {
    RunResult rr = run(build_fr_scenario(c.options));
    CHECK(rr.joint.total() == doctest::Approx(1.0).epsilon(1e-9));
    // marginalizing to each single variable conserves probability
    for (const auto& v : rr.variables) {
      auto m = rr.joint.marginal({v});
      double s = 0.0;
      for (const auto& [k, e] : m.table) s += e.p;
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}
