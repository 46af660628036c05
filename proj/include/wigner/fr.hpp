#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wigner/scenario.hpp"

namespace wigner {

// Builders for the extended Wigner's-friend protocol: two friends measuring
// a coin and a spin, two super-observers measuring entire laboratories in
// entangled bases, with configurable measurement ordering, collapse
// placement, postselection and an optional which-path qubit.

enum class FrOrdering {
  kFbarFWbarW,  // friends first, then both super-observers
  kFWbarFbar,   // spin friend, then the coin super-observer, then the friend
  kFbarFWWbar,  // W before (or without) the coin super-observer
};

struct FrOptions {
  FrOrdering ordering = FrOrdering::kFbarFWbarW;
  std::set<std::string> collapse_at;  // subset of {Fbar, F, Wbar, W}
  bool hidden_qubit = false;
  bool omit_wbar = false;  // drop the coin super-observer entirely
  // variable -> postselected outcome label; only for collapsing agents
  std::map<std::string, std::string> postselect;
};

namespace fr_detail {

inline ExactAmp inv_sqrt2() { return ExactAmp::sqrt_of(Rational(1, 2)); }

inline Matrix spin_to_transverse() {
  double s = 1.0 / std::sqrt(2.0);
  return {{s, s}, {s, -s}};
}
inline ExactMatrix spin_to_transverse_exact() {
  ExactAmp s = inv_sqrt2();
  return {{s, s}, {s, -s}};
}

// sub-index layout for a pair of factors (a has dim da, b has dim db):
// index = a_digit * db + b_digit
inline BasisOutcome pair_outcome(const std::string& label, std::size_t dim,
                                 std::size_t plus_idx, std::size_t minus_idx,
                                 bool minus_sign) {
  BasisOutcome o;
  o.label = label;
  o.amps.assign(dim, Complex(0.0));
  o.exact = std::vector<ExactAmp>(dim);
  ExactAmp s = inv_sqrt2();
  o.amps[plus_idx] = 1.0 / std::sqrt(2.0);
  (*o.exact)[plus_idx] = s;
  o.amps[minus_idx] = (minus_sign ? -1.0 : 1.0) / std::sqrt(2.0);
  (*o.exact)[minus_idx] = minus_sign ? -s : s;
  return o;
}

}  // namespace fr_detail

// Entangled basis measured by the coin super-observer on coin (x) Fbar:
// ok = (|heads,h> - |tails,t>)/sqrt(2), fail = (|heads,h> + |tails,t>)/sqrt(2).
// With `memory_blank` the friend has not measured yet and her memory is on
// its blank level instead of h/t.
inline ObservableBasis wbar_basis(bool memory_blank = false) {
  ObservableBasis b;
  b.name = memory_blank ? "wbar_basis_blank" : "wbar_basis";
  b.target_factors = {"coin", "Fbar"};
  // coin(2) x Fbar(3): index = coin*3 + fbar; fbar digits: 0=blank,1=h,2=t
  std::size_t heads_idx = memory_blank ? 0 : 1;
  std::size_t tails_idx = memory_blank ? 3 : 5;
  b.outcomes.push_back(
      fr_detail::pair_outcome("okbar", 6, heads_idx, tails_idx, true));
  b.outcomes.push_back(
      fr_detail::pair_outcome("failbar", 6, heads_idx, tails_idx, false));
  return b;
}

// Entangled basis measured by the spin super-observer on spin (x) F:
// OK = (|down,down> - |up,up>)/sqrt(2), fail = (|down,down> + |up,up>)/sqrt(2).
inline ObservableBasis w_basis() {
  ObservableBasis b;
  b.name = "w_basis";
  b.target_factors = {"spin", "F"};
  // spin(2) x F(3): index = spin*3 + f; f digits: 0=blank,1=down,2=up
  b.outcomes.push_back(fr_detail::pair_outcome("OK", 6, 1, 5, true));
  b.outcomes.push_back(fr_detail::pair_outcome("fail", 6, 1, 5, false));
  return b;
}

inline SpacePtr fr_space(bool hidden_qubit) {
  std::vector<FactorSpace> factors;
  factors.push_back(make_factor("coin", {"heads", "tails"}));
  factors.push_back(make_factor("Fbar", {"0", "h", "t"}));
  factors.push_back(make_factor("spin", {"down", "up"}));
  factors.push_back(make_factor("F", {"0", "down", "up"}));
  if (hidden_qubit) factors.push_back(make_factor("Gbar", {"0", "h", "t"}));
  factors.push_back(make_factor("Wbar", {"0", "okbar", "failbar"}));
  factors.push_back(make_factor("W", {"0", "OK", "fail"}));
  return make_product_space(std::move(factors));
}

inline Scenario build_fr_scenario(const FrOptions& opt) {
  Scenario sc;
  sc.space = fr_space(opt.hidden_qubit);

  // coin in (1/sqrt(3))|heads> + sqrt(2/3)|tails>, everything else blank
  auto prep_term = [&](ExactAmp coef, const std::string& coin_label) {
    SuperposeTerm t;
    t.coefficient = coef;
    for (const auto& f : sc.space->factors())
      t.labels.push_back(f.label == "coin" ? coin_label
                         : f.label == "spin" ? "down"
                                             : f.basis_labels[0]);
    return t;
  };
  sc.preparation.push_back(
      prep_term(ExactAmp::sqrt_of(Rational(1, 3)), "heads"));
  sc.preparation.push_back(
      prep_term(ExactAmp::sqrt_of(Rational(2, 3)), "tails"));

  for (const auto& agent : opt.collapse_at)
    if (agent != "Fbar" && agent != "F" && agent != "Wbar" && agent != "W")
      throw error("unknown collapsing agent '" + agent + "'");

  auto variable_of = [](const std::string& agent) -> std::string {
    if (agent == "Fbar") return "r";
    if (agent == "F") return "z";
    if (agent == "Wbar") return "wbar";
    return "w";
  };
  for (const auto& [var, outcome] : opt.postselect) {
    std::string agent = var == "r"      ? "Fbar"
                        : var == "z"    ? "F"
                        : var == "wbar" ? "Wbar"
                        : var == "w"    ? "W"
                                        : "";
    if (agent.empty()) throw error("unknown postselect variable '" + var + "'");
    if (!opt.collapse_at.count(agent))
      throw error("cannot postselect outcome '" + outcome +
                  "' of a non-collapsing step (agent " + agent + ")");
  }

  auto measure = [&](const ObservableBasis& basis, const std::string& agent) {
    MeasurementStep s;
    s.kind = MeasurementStep::Kind::kMeasure;
    s.basis = basis;
    s.recorder = agent;
    s.variable = variable_of(agent);
    s.collapse = opt.collapse_at.count(agent) > 0;
    auto it = opt.postselect.find(s.variable);
    if (it != opt.postselect.end()) s.selected_outcome = it->second;
    return s;
  };

  auto send_spin = [&](const std::string& control,
                       const std::string& tails_label) {
    MeasurementStep s;
    s.kind = MeasurementStep::Kind::kControlled;
    s.control = control;
    s.targets = {"spin"};
    s.cases[tails_label] = fr_detail::spin_to_transverse();
    s.exact_cases = std::map<std::string, ExactMatrix>{
        {tails_label, fr_detail::spin_to_transverse_exact()}};
    return s;
  };

  auto copy_record_to_gbar = [&]() {
    // Gbar copies Fbar's record: basis {h, t} on the memory factor
    ObservableBasis b;
    b.name = "Fbar_record";
    b.target_factors = {"Fbar"};
    for (std::size_t k = 1; k <= 2; ++k) {
      BasisOutcome o;
      o.label = sc.space->factor("Fbar").basis_labels[k];
      o.amps.assign(3, Complex(0.0));
      o.amps[k] = 1.0;
      o.exact = std::vector<ExactAmp>(3);
      (*o.exact)[k] = ExactAmp(1);
      b.outcomes.push_back(std::move(o));
    }
    MeasurementStep s;
    s.kind = MeasurementStep::Kind::kMeasure;
    s.basis = b;
    s.recorder = "Gbar";
    s.variable = "gbar";
    s.collapse = false;
    return s;
  };

  const auto coin_comp = ObservableBasis::computational(*sc.space, "coin");
  const auto spin_comp = ObservableBasis::computational(*sc.space, "spin");

  switch (opt.ordering) {
    case FrOrdering::kFbarFWbarW:
      sc.name = "fr";
      sc.steps.push_back(measure(coin_comp, "Fbar"));
      if (opt.hidden_qubit) sc.steps.push_back(copy_record_to_gbar());
      sc.steps.push_back(send_spin("Fbar", "t"));
      sc.steps.push_back(measure(spin_comp, "F"));
      if (!opt.omit_wbar)
        sc.steps.push_back(measure(wbar_basis(), "Wbar"));
      sc.steps.push_back(measure(w_basis(), "W"));
      break;
    case FrOrdering::kFWbarFbar:
      sc.name = "fr-reversed";
      if (opt.hidden_qubit)
        throw error("hidden qubit requires the friend to measure first");
      // the spin still depends on the coin, which nobody has measured yet
      sc.steps.push_back(send_spin("coin", "tails"));
      sc.steps.push_back(measure(spin_comp, "F"));
      if (!opt.omit_wbar)
        sc.steps.push_back(
            measure(wbar_basis(/*memory_blank=*/true), "Wbar"));
      sc.steps.push_back(measure(coin_comp, "Fbar"));
      sc.steps.push_back(measure(w_basis(), "W"));
      break;
    case FrOrdering::kFbarFWWbar:
      sc.name = "fr-w-first";
      sc.steps.push_back(measure(coin_comp, "Fbar"));
      if (opt.hidden_qubit) sc.steps.push_back(copy_record_to_gbar());
      sc.steps.push_back(send_spin("Fbar", "t"));
      sc.steps.push_back(measure(spin_comp, "F"));
      sc.steps.push_back(measure(w_basis(), "W"));
      if (!opt.omit_wbar)
        sc.steps.push_back(measure(wbar_basis(), "Wbar"));
      break;
  }
  return sc;
}

// The record-flip setup: the friend has already seen tails and the spin
// friend has recorded, then both super-observers measure coherently. The
// coin memory starts definitely on tails, yet after the first entangled
// measurement its pointer is equally likely to indicate heads.
inline Scenario fr_flip_scenario() {
  Scenario sc;
  sc.name = "fr-flip";
  sc.space = fr_space(false);
  ExactAmp c = fr_detail::inv_sqrt2();
  sc.preparation.push_back({c, {"tails", "t", "down", "down", "0", "0"}});
  sc.preparation.push_back({c, {"tails", "t", "up", "up", "0", "0"}});
  auto measure = [&](const ObservableBasis& b, const char* rec,
                     const char* var) {
    MeasurementStep s;
    s.kind = MeasurementStep::Kind::kMeasure;
    s.basis = b;
    s.recorder = rec;
    s.variable = var;
    return s;
  };
  sc.steps.push_back(measure(wbar_basis(), "Wbar", "wbar"));
  sc.steps.push_back(measure(w_basis(), "W", "w"));
  return sc;
}

// The Table-II certainty statements, as conditional/possibility claims over
// the recorded variables r (coin), z (spin), wbar and w.
inline Statement sq_fbar() {
  Statement s;
  s.id = "SQ_FBAR";
  s.form = Statement::Form::kCertain;
  s.event.equals = {{"w", "fail"}};
  s.condition = Predicate{{{"r", "tails"}}};
  return s;
}
inline Statement sq_wbar() {
  Statement s;
  s.id = "SQ_WBAR";
  s.form = Statement::Form::kCertain;
  s.event.equals = {{"z", "up"}};
  s.condition = Predicate{{{"wbar", "okbar"}}};
  return s;
}
inline Statement sq_w() {
  Statement s;
  s.id = "SQ_W";
  s.form = Statement::Form::kPossible;
  s.event.equals = {{"wbar", "okbar"}, {"w", "OK"}};
  return s;
}
inline std::vector<Statement> table_ii_statements() {
  return {sq_fbar(), sq_wbar(), sq_w()};
}

struct NamedConfig {
  std::string name;
  FrOptions options;
};

// The six collapse/ordering configurations studied in the shipped suite.
inline std::vector<NamedConfig> fr_suite_configs() {
  std::vector<NamedConfig> out;
  out.push_back({"no-collapse", {}});
  {
    FrOptions o;
    o.collapse_at = {"Fbar"};
    o.postselect = {{"r", "tails"}};
    out.push_back({"collapse-Fbar", o});
  }
  {
    FrOptions o;
    o.collapse_at = {"Fbar", "F"};
    o.postselect = {{"r", "tails"}, {"z", "up"}};
    out.push_back({"collapse-Fbar-F", o});
  }
  {
    FrOptions o;
    o.collapse_at = {"Fbar", "F", "Wbar", "W"};
    out.push_back({"all-collapse", o});
  }
  {
    FrOptions o;
    o.ordering = FrOrdering::kFWbarFbar;
    o.collapse_at = {"Wbar", "Fbar"};
    o.postselect = {{"wbar", "okbar"}, {"r", "tails"}};
    out.push_back({"Wbar-before-Fbar", o});
  }
  {
    FrOptions o;
    o.ordering = FrOrdering::kFbarFWWbar;
    o.omit_wbar = true;
    out.push_back({"W-without-Wbar", o});
  }
  return out;
}

inline std::vector<Scenario> fr_suite() {
  std::vector<Scenario> out;
  for (const auto& c : fr_suite_configs()) {
    Scenario sc = build_fr_scenario(c.options);
    sc.name = c.name;
    out.push_back(std::move(sc));
  }
  return out;
}

// Deliberately non-physical: evaluates each statement in the configuration
// most favorable to it and combines the verdicts, reproducing the fallacy of
// mixing predictions from different state-vector histories.
inline MatrixRow mixed_mode_row() {
  MatrixRow row;
  row.configuration = "mixed (non-physical)";
  {
    FrOptions o;
    o.collapse_at = {"Fbar"};
    RunResult rr = run(build_fr_scenario(o));
    row.results.push_back(evaluate_statement_in_run(rr, sq_fbar()));
  }
  {
    RunResult rr = run(build_fr_scenario({}));
    row.results.push_back(evaluate_statement_in_run(rr, sq_wbar()));
    row.results.push_back(evaluate_statement_in_run(rr, sq_w()));
  }
  return row;
}

}  // namespace wigner
