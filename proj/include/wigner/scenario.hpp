#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wigner/measurement.hpp"

namespace wigner {

// A conjunction of variable = outcome-label constraints.
struct Predicate {
  std::vector<std::pair<std::string, std::string>> equals;

  std::vector<std::string> variables() const {
    std::vector<std::string> out;
    for (const auto& [v, l] : equals) out.push_back(v);
    return out;
  }
  std::map<std::string, std::string> as_map() const {
    std::map<std::string, std::string> out;
    for (const auto& [v, l] : equals) out[v] = l;
    return out;
  }
};

struct Statement {
  enum class Form { kCertain, kPossible };
  std::string id;
  Form form = Form::kCertain;
  Predicate event;                    // consequent (CERTAIN) or event (POSSIBLE)
  std::optional<Predicate> condition; // CERTAIN only
  std::optional<std::string> expect;  // "HOLDS" / "FAILS" / "VACUOUS"

  std::vector<std::string> variables() const {
    std::vector<std::string> out = event.variables();
    if (condition)
      for (const auto& v : condition->variables()) out.push_back(v);
    return out;
  }
};

enum class Verdict { kHolds, kFails, kVacuous };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kHolds: return "HOLDS";
    case Verdict::kFails: return "FAILS";
    case Verdict::kVacuous: return "VACUOUS";
  }
  return "?";
}

struct StatementResult {
  std::string id;
  Verdict verdict = Verdict::kVacuous;
  double probability = 0.0;            // conditional (CERTAIN) or event prob
  double condition_probability = 1.0;
  std::vector<std::pair<std::vector<std::string>, double>> witness;
};

inline constexpr double kCertainTol = 1e-9;
inline constexpr double kVacuousTol = 1e-12;

// Pure evaluation against a joint distribution of recorded outcomes.
inline StatementResult evaluate_statement(const JointDistribution& joint,
                                          const Statement& stmt,
                                          double tolerance = kCertainTol) {
  StatementResult res;
  res.id = stmt.id;
  for (const auto& v : stmt.variables()) {
    if (!joint.has_variable(v)) {
      res.verdict = Verdict::kVacuous;
      return res;
    }
  }
  auto event = stmt.event.as_map();
  for (const auto& [key, e] : joint.table) {
    bool in_event = true;
    for (const auto& [v, l] : event)
      if (key[joint.var_index(v)] != l) in_event = false;
    bool in_cond = true;
    if (stmt.condition)
      for (const auto& [v, l] : stmt.condition->as_map())
        if (key[joint.var_index(v)] != l) in_cond = false;
    if (in_cond && (in_event || stmt.form == Statement::Form::kCertain))
      res.witness.push_back({key, e.p});
  }
  if (stmt.form == Statement::Form::kPossible) {
    res.probability = joint.prob_of(event);
    res.verdict =
        res.probability > tolerance ? Verdict::kHolds : Verdict::kFails;
    return res;
  }
  double p_cond = 1.0;
  if (stmt.condition) p_cond = joint.prob_of(stmt.condition->as_map());
  res.condition_probability = p_cond;
  if (p_cond < kVacuousTol) {
    res.verdict = Verdict::kVacuous;
    return res;
  }
  auto both = event;
  if (stmt.condition)
    for (const auto& [v, l] : stmt.condition->as_map()) both[v] = l;
  res.probability = joint.prob_of(both) / p_cond;
  res.verdict = std::abs(res.probability - 1.0) <= tolerance ? Verdict::kHolds
                                                             : Verdict::kFails;
  return res;
}

// A runnable protocol: fixed product space, exact preparation, ordered steps,
// statements to check.
struct Scenario {
  std::string name;
  SpacePtr space;
  std::vector<SuperposeTerm> preparation;
  std::vector<MeasurementStep> steps;
  std::vector<Statement> statements;
};

namespace detail {

struct Branch {
  double weight = 1.0;
  std::optional<Rational> weight_exact = Rational(1);
  StateVector state;
  std::map<std::string, std::string> assigned;  // collapse outcomes
  std::vector<StateVector> history;             // state after each step
};

}  // namespace detail

struct RunResult {
  JointDistribution joint;              // all recorded variables, end readout
  std::optional<StateVector> final_state;  // absent after unselected collapse
  std::vector<std::string> variables;
  // bookkeeping for time-sliced statement evaluation
  std::vector<detail::Branch> branches;
  std::map<std::string, std::size_t> record_step;  // variable -> step index
  std::map<std::string, std::string> recorder_of;  // variable -> factor label
  // variable -> declared outcome labels, in record-digit order (digit k holds
  // outcome k-1; digit 0 is blank)
  std::map<std::string, std::vector<std::string>> outcome_labels;
  const Scenario* scenario = nullptr;
  double normalization = 1.0;  // total weight before conditioning
};

namespace detail {

// Joint over `vars` read at the state reached after step `slice`.
inline JointDistribution joint_at(const RunResult& run,
                                  const std::vector<std::string>& vars,
                                  std::size_t slice) {
  JointDistribution joint;
  joint.variables = vars;
  for (const auto& br : run.branches) {
    const StateVector& st = br.history[slice];
    // split vars into collapse-assigned and coherent-recorded
    std::vector<std::pair<std::string, std::string>> coherent;
    std::vector<std::string> fixed_labels(vars.size());
    for (std::size_t i = 0; i < vars.size(); ++i) {
      auto it = br.assigned.find(vars[i]);
      if (it != br.assigned.end() &&
          run.record_step.at(vars[i]) <= slice) {
        fixed_labels[i] = it->second;
      } else {
        coherent.push_back({vars[i], run.recorder_of.at(vars[i])});
      }
    }
    // Enumerate coherent readouts with explicit weights.
    std::function<void(const StateVector&, std::size_t,
                       std::map<std::string, std::string>&)>
        walk = [&](const StateVector& s, std::size_t k,
                   std::map<std::string, std::string>& am) {
          if (k == coherent.size()) {
            double p = s.norm_sq();  // joint weight of this readout path
            if (p <= kVacuousTol) return;
            std::vector<std::string> key(vars.size());
            for (std::size_t i = 0; i < vars.size(); ++i)
              key[i] = fixed_labels[i].empty() ? am.at(vars[i])
                                               : fixed_labels[i];
            joint.add(key, br.weight * p, std::nullopt);
            return;
          }
          const auto& [var, rec] = coherent[k];
          ObservableBasis comp =
              ObservableBasis::computational(*s.space, rec);
          const auto& names = run.outcome_labels.at(var);
          for (std::size_t d = 1;
               d < comp.outcomes.size() && d <= names.size(); ++d) {
            StateVector c = project_component(s, comp, comp.outcomes[d]);
            if (c.norm_sq() <= kVacuousTol) continue;
            am[var] = names[d - 1];
            walk(c, k + 1, am);
            am.erase(var);
          }
        };
    if (coherent.empty()) {
      std::vector<std::string> key(vars.size());
      for (std::size_t i = 0; i < vars.size(); ++i) key[i] = fixed_labels[i];
      joint.add(key, br.weight * st.norm_sq(), std::nullopt);
    } else {
      std::map<std::string, std::string> am;
      walk(st, 0, am);
    }
  }
  double total = joint.total();
  if (total <= kVacuousTol) throw error("empty joint at slice");
  for (auto& [k, e] : joint.table) e.p /= total;
  return joint;
}

}  // namespace detail

// Executes the scenario. Collapse steps branch (or condition, when an
// outcome is postselected); coherent steps entangle recorder factors. The
// returned joint is the end-of-protocol readout of every recorded variable,
// conditioned on any postselections.
inline RunResult run(const Scenario& scenario) {
  RunResult res;
  res.scenario = &scenario;
  StateVector init = superpose(scenario.space, scenario.preparation);

  std::vector<detail::Branch> branches;
  branches.push_back({1.0, Rational(1), init, {}, {}});

  for (std::size_t si = 0; si < scenario.steps.size(); ++si) {
    const MeasurementStep& s = scenario.steps[si];
    std::vector<detail::Branch> next;
    for (auto& br : branches) {
      switch (s.kind) {
        case MeasurementStep::Kind::kUnitary: {
          detail::Branch nb = br;
          nb.state = apply_unitary(br.state, s.matrix, s.targets,
                                   s.exact_matrix ? &*s.exact_matrix
                                                  : nullptr);
          nb.history.push_back(nb.state);
          next.push_back(std::move(nb));
          break;
        }
        case MeasurementStep::Kind::kControlled: {
          detail::Branch nb = br;
          nb.state = controlled_unitary(br.state, s.control, s.cases,
                                        s.targets,
                                        s.exact_cases ? &*s.exact_cases
                                                      : nullptr);
          nb.history.push_back(nb.state);
          next.push_back(std::move(nb));
          break;
        }
        case MeasurementStep::Kind::kPremeasure: {
          detail::Branch nb = br;
          nb.state = premeasure(br.state, s.basis, *s.recorder);
          nb.history.push_back(nb.state);
          next.push_back(std::move(nb));
          break;
        }
        case MeasurementStep::Kind::kMeasure: {
          if (!s.variable.empty()) {
            res.record_step[s.variable] = si;
            if (s.recorder) res.recorder_of[s.variable] = *s.recorder;
            auto& names = res.outcome_labels[s.variable];
            names.clear();
            for (const auto& o : s.basis.outcomes)
              if (!o.synthetic) names.push_back(o.label);
          }
          if (!s.collapse) {
            if (!s.recorder)
              throw error("coherent measurement step needs a recorder");
            if (s.selected_outcome)
              throw error("cannot postselect outcome '" + *s.selected_outcome +
                          "' of a non-collapsing step");
            detail::Branch nb = br;
            nb.state = premeasure(br.state, s.basis, *s.recorder);
            nb.history.push_back(nb.state);
            next.push_back(std::move(nb));
            break;
          }
          // collapse: branch over outcomes (or keep the selected one)
          ObservableBasis full = complete_basis(s.basis, *br.state.space);
          StateVector entangled =
              s.recorder ? premeasure(br.state, s.basis, *s.recorder)
                         : br.state;
          std::size_t k = 0;
          for (const auto& o : full.outcomes) {
            std::size_t record_digit = o.synthetic ? 0 : ++k;
            (void)record_digit;
            if (o.synthetic) continue;
            StateVector comp =
                s.recorder
                    ? project_component(
                          entangled,
                          ObservableBasis::computational(*br.state.space,
                                                         *s.recorder),
                          ObservableBasis::computational(*br.state.space,
                                                         *s.recorder)
                              .outcomes[k])
                    : project_component(entangled, full, o);
            double p = comp.norm_sq();
            if (s.selected_outcome && o.label != *s.selected_outcome)
              continue;
            if (p <= kVacuousTol) {
              if (s.selected_outcome)
                throw error("branch does not exist: outcome '" + o.label +
                            "' has zero probability");
              continue;
            }
            detail::Branch nb = br;
            nb.weight = br.weight * p;
            auto pe = exact_norm_sq(comp);
            if (br.weight_exact && pe)
              nb.weight_exact = *br.weight_exact * *pe;
            else
              nb.weight_exact.reset();
            // renormalize the component
            if (comp.has_exact() && pe) {
              ExactAmp inv = ExactAmp(1) / ExactAmp::sqrt_of(*pe);
              for (auto& e : *comp.exact) e *= inv;
              comp.sync_from_exact();
            } else {
              comp.drop_exact();
              double n = std::sqrt(p);
              for (auto& a : comp.amps) a /= n;
            }
            nb.state = std::move(comp);
            if (!s.variable.empty()) nb.assigned[s.variable] = o.label;
            nb.history.push_back(nb.state);
            next.push_back(std::move(nb));
          }
          break;
        }
      }
    }
    branches = std::move(next);
    if (branches.empty()) throw error("no surviving branches");
  }

  for (const auto& s : scenario.steps)
    if (s.kind == MeasurementStep::Kind::kMeasure && !s.variable.empty())
      res.variables.push_back(s.variable);

  // End-of-protocol joint: collapse assignments are fixed, coherent records
  // are Born-read from the final state.
  res.joint.variables = res.variables;
  double total = 0.0;
  std::optional<Rational> total_exact = Rational(0);
  struct Acc {
    double p = 0.0;
    std::optional<Rational> pe;
    bool first = true;
  };
  std::map<std::vector<std::string>, Acc> acc;
  for (const auto& br : branches) {
    std::vector<std::pair<std::string, std::string>> coherent;
    for (const auto& v : res.variables)
      if (!br.assigned.count(v)) coherent.push_back({v, res.recorder_of.at(v)});
    std::function<void(const StateVector&, std::size_t,
                       std::map<std::string, std::string>&)>
        walk = [&](const StateVector& s, std::size_t k,
                   std::map<std::string, std::string>& am) {
          if (k == coherent.size()) {
            double p = s.norm_sq();
            if (p <= kVacuousTol) return;
            std::vector<std::string> key;
            for (const auto& v : res.variables) {
              auto it = br.assigned.find(v);
              key.push_back(it != br.assigned.end() ? it->second : am.at(v));
            }
            auto pe = exact_norm_sq(s);
            Acc& a = acc[key];
            a.p += br.weight * p;
            if (a.first) {
              if (br.weight_exact && pe) a.pe = *br.weight_exact * *pe;
              a.first = false;
            } else if (a.pe && br.weight_exact && pe) {
              a.pe = *a.pe + *br.weight_exact * *pe;
            } else {
              a.pe.reset();
            }
            return;
          }
          const auto& [var, rec] = coherent[k];
          ObservableBasis comp = ObservableBasis::computational(*s.space, rec);
          const auto& names = res.outcome_labels.at(var);
          for (std::size_t d = 1;
               d < comp.outcomes.size() && d <= names.size(); ++d) {
            StateVector c = project_component(s, comp, comp.outcomes[d]);
            if (c.norm_sq() <= kVacuousTol &&
                (!c.has_exact() || !exact_norm_sq(c) ||
                 exact_norm_sq(c)->is_zero()))
              continue;
            am[var] = names[d - 1];
            walk(c, k + 1, am);
            am.erase(var);
          }
        };
    std::map<std::string, std::string> am;
    walk(br.state, 0, am);
  }
  for (auto& [key, a] : acc) {
    total += a.p;
    if (total_exact && a.pe)
      total_exact = *total_exact + *a.pe;
    else
      total_exact.reset();
  }
  if (total <= kVacuousTol) throw error("run has zero total probability");
  for (auto& [key, a] : acc) {
    JointEntry e;
    e.p = a.p / total;
    if (a.pe && total_exact && !(total_exact->is_zero()))
      e.p_exact = *a.pe / *total_exact;
    res.joint.table[key] = e;
  }
  res.normalization = total;

  if (branches.size() == 1) res.final_state = branches[0].state;
  res.branches = std::move(branches);
  return res;
}

// A certainty statement is checked against the records as they stand when
// the last of its variables has just been measured; later steps may scramble
// earlier records and are deliberately excluded (that scrambling is the
// phenomenon under study, and statements quantify over the records the
// speaking agent could actually consult).
inline StatementResult evaluate_statement_in_run(const RunResult& run,
                                                 const Statement& stmt,
                                                 double tolerance =
                                                     kCertainTol) {
  std::vector<std::string> vars;
  std::set<std::string> seen;
  for (const auto& v : stmt.variables())
    if (seen.insert(v).second) vars.push_back(v);
  for (const auto& v : vars) {
    if (!run.record_step.count(v)) {
      StatementResult res;
      res.id = stmt.id;
      res.verdict = Verdict::kVacuous;
      return res;
    }
  }
  std::size_t slice = 0;
  for (const auto& v : vars)
    slice = std::max(slice, run.record_step.at(v));
  JointDistribution joint = detail::joint_at(run, vars, slice);
  return evaluate_statement(joint, stmt, tolerance);
}

struct MatrixRow {
  std::string configuration;
  std::vector<StatementResult> results;
};

struct MatrixReport {
  std::vector<std::string> statement_ids;
  std::vector<MatrixRow> rows;

  bool has_all_holds_row() const {
    for (const auto& row : rows) {
      bool all = !row.results.empty();
      for (const auto& r : row.results)
        if (r.verdict != Verdict::kHolds) all = false;
      if (all) return true;
    }
    return false;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["statements"] = statement_ids;
    j["rows"] = nlohmann::json::array();
    for (const auto& row : rows) {
      nlohmann::json r;
      r["configuration"] = row.configuration;
      r["verdicts"] = nlohmann::json::array();
      for (const auto& res : row.results) {
        r["verdicts"].push_back({{"statement", res.id},
                                 {"verdict", verdict_name(res.verdict)},
                                 {"p", res.probability}});
      }
      j["rows"].push_back(r);
    }
    j["all_holds_row"] = has_all_holds_row();
    return j;
  }

  std::string to_text() const {
    std::size_t w0 = 13;
    for (const auto& row : rows) w0 = std::max(w0, row.configuration.size());
    std::string out(w0, ' ');
    out.replace(0, 13, "configuration");
    for (const auto& id : statement_ids) {
      out += "  ";
      out += id;
      out += std::string(id.size() < 18 ? 18 - id.size() : 1, ' ');
    }
    out += "\n";
    for (const auto& row : rows) {
      std::string line = row.configuration;
      line += std::string(w0 - row.configuration.size(), ' ');
      for (const auto& res : row.results) {
        std::string cell = std::string(verdict_name(res.verdict));
        if (res.verdict != Verdict::kVacuous)
          cell += " (p=" + format_double(res.probability) + ")";
        line += "  " + cell;
        if (cell.size() < 18) line += std::string(18 - cell.size(), ' ');
      }
      out += line + "\n";
    }
    return out;
  }
};

// Runs every configuration and evaluates the given statements on each.
inline MatrixReport statement_matrix(const std::vector<Scenario>& configs,
                                     const std::vector<Statement>& statements,
                                     double tolerance = kCertainTol) {
  MatrixReport rep;
  for (const auto& s : statements) rep.statement_ids.push_back(s.id);
  for (const auto& sc : configs) {
    RunResult rr = run(sc);
    MatrixRow row;
    row.configuration = sc.name;
    for (const auto& s : statements)
      row.results.push_back(evaluate_statement_in_run(rr, s, tolerance));
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace wigner
