#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wigner/hilbert.hpp"

namespace wigner {

// An orthonormal family of (possibly entangled) outcome vectors on a subset
// of factors. Declared outcomes may span only part of the target subspace
// (the protocols declare two vectors on a 6-dimensional coin (x) memory
// subspace); complete() fills in the orthogonal complement with synthetic
// outcomes labeled `⊥k`, which protocol states never populate.
struct BasisOutcome {
  std::string label;
  std::vector<Complex> amps;  // over the target subspace, mixed-radix
  std::optional<std::vector<ExactAmp>> exact;
  bool synthetic = false;  // true for completion outcomes
};

struct ObservableBasis {
  std::string name;
  std::vector<std::string> target_factors;
  std::vector<BasisOutcome> outcomes;

  std::size_t declared_count() const {
    std::size_t n = 0;
    for (const auto& o : outcomes)
      if (!o.synthetic) ++n;
    return n;
  }

  const BasisOutcome& outcome(const std::string& label) const {
    for (const auto& o : outcomes)
      if (o.label == label) return o;
    throw error("basis '" + name + "' has no outcome '" + label + "'");
  }

  // Computational basis of a single factor: one outcome per basis label.
  static ObservableBasis computational(const ProductSpace& space,
                                       const std::string& factor_label) {
    const FactorSpace& f = space.factor(factor_label);
    ObservableBasis b{factor_label, {factor_label}, {}};
    for (std::size_t i = 0; i < f.dim(); ++i) {
      BasisOutcome o;
      o.label = f.basis_labels[i];
      o.amps.assign(f.dim(), Complex(0.0));
      o.amps[i] = 1.0;
      o.exact = std::vector<ExactAmp>(f.dim());
      (*o.exact)[i] = ExactAmp(1);
      b.outcomes.push_back(std::move(o));
    }
    return b;
  }
};

namespace detail {

inline void check_orthonormal(const ObservableBasis& b) {
  for (std::size_t i = 0; i < b.outcomes.size(); ++i) {
    for (std::size_t j = i; j < b.outcomes.size(); ++j) {
      Complex s = 0.0;
      const auto& vi = b.outcomes[i].amps;
      const auto& vj = b.outcomes[j].amps;
      if (vi.size() != vj.size())
        throw error("basis '" + b.name + "' has outcome vectors of unequal "
                    "dimension");
      for (std::size_t k = 0; k < vi.size(); ++k)
        s += std::conj(vi[k]) * vj[k];
      Complex want = (i == j) ? Complex(1.0) : Complex(0.0);
      if (std::abs(s - want) > kNumericTol)
        throw error("basis '" + b.name + "' is not orthonormal: <" +
                    b.outcomes[i].label + "|" + b.outcomes[j].label + "> = " +
                    format_double(s.real()) +
                    (s.imag() != 0.0 ? "+" + format_double(s.imag()) + "i"
                                     : ""));
    }
  }
}

}  // namespace detail

// Returns the basis extended to a complete orthonormal family on its target
// subspace, appending `⊥k` outcomes for the orthogonal complement.
inline ObservableBasis complete_basis(const ObservableBasis& declared,
                                      const ProductSpace& space) {
  detail::check_orthonormal(declared);
  std::size_t sub_dim = 1;
  for (const auto& t : declared.target_factors)
    sub_dim *= space.factor(t).dim();
  for (const auto& o : declared.outcomes)
    if (o.amps.size() != sub_dim)
      throw error("basis '" + declared.name + "' outcome '" + o.label +
                  "' has wrong dimension");

  ObservableBasis out = declared;
  std::size_t perp = 0;
  for (std::size_t e = 0; e < sub_dim && out.outcomes.size() < sub_dim; ++e) {
    std::vector<Complex> v(sub_dim, 0.0);
    v[e] = 1.0;
    for (const auto& o : out.outcomes) {
      Complex ip = 0.0;
      for (std::size_t k = 0; k < sub_dim; ++k)
        ip += std::conj(o.amps[k]) * v[k];
      for (std::size_t k = 0; k < sub_dim; ++k) v[k] -= ip * o.amps[k];
    }
    double n = 0.0;
    for (const auto& c : v) n += std::norm(c);
    n = std::sqrt(n);
    if (n < 1e-8) continue;
    for (auto& c : v) c /= n;
    BasisOutcome o;
    o.label = "⊥" + std::to_string(++perp);
    o.amps = std::move(v);
    o.synthetic = true;
    out.outcomes.push_back(std::move(o));
  }
  if (out.outcomes.size() != sub_dim)
    throw error("basis '" + declared.name + "' could not be completed");
  return out;
}

// Unnormalized projection of `state` onto the span of one basis outcome
// (the projector |v><v| tensored with identity off the targets).
inline StateVector project_component(const StateVector& state,
                                     const ObservableBasis& basis,
                                     const BasisOutcome& outcome) {
  detail::TargetLayout layout(*state.space, basis.target_factors);
  if (outcome.amps.size() != layout.sub_dim)
    throw error("basis '" + basis.name + "' does not match the state's space");

  StateVector out{state.space, std::vector<Complex>(state.space->dim(), 0.0),
                  std::nullopt};
  bool track_exact = state.has_exact() && outcome.exact.has_value();
  if (track_exact) out.exact = std::vector<ExactAmp>(state.space->dim());

  std::vector<std::size_t> offsets(layout.sub_dim);
  for (std::size_t s = 0; s < layout.sub_dim; ++s)
    offsets[s] = layout.offset(*state.space, s);

  for (std::size_t block : layout.blocks(*state.space)) {
    Complex ip = 0.0;
    for (std::size_t s = 0; s < layout.sub_dim; ++s)
      ip += std::conj(outcome.amps[s]) * state.amps[block + offsets[s]];
    for (std::size_t s = 0; s < layout.sub_dim; ++s)
      out.amps[block + offsets[s]] = outcome.amps[s] * ip;
    if (track_exact) {
      ExactAmp eip;
      for (std::size_t s = 0; s < layout.sub_dim; ++s)
        eip += (*outcome.exact)[s] * (*state.exact)[block + offsets[s]];
      for (std::size_t s = 0; s < layout.sub_dim; ++s)
        (*out.exact)[block + offsets[s]] = (*outcome.exact)[s] * eip;
    }
  }
  if (track_exact) out.sync_from_exact();
  return out;
}

struct ExpansionComponent {
  std::string outcome;
  StateVector component;  // unnormalized projection
  double weight;          // squared amplitude norm
  std::optional<Rational> weight_exact;
};

inline std::optional<Rational> exact_norm_sq(const StateVector& s) {
  if (!s.has_exact()) return std::nullopt;
  ExactAmp nsq;
  for (const auto& e : *s.exact) nsq += e.squared();
  return nsq.as_rational();
}

// Expands a state over a complete basis; components are mutually orthogonal
// and their weights sum to 1 for a normalized input.
inline std::vector<ExpansionComponent> expand_in_basis(
    const StateVector& state, const ObservableBasis& basis) {
  ObservableBasis full = complete_basis(basis, *state.space);
  std::vector<ExpansionComponent> out;
  for (const auto& o : full.outcomes) {
    ExpansionComponent c;
    c.outcome = o.label;
    c.component = project_component(state, full, o);
    c.weight = c.component.norm_sq();
    c.weight_exact = exact_norm_sq(c.component);
    out.push_back(std::move(c));
  }
  return out;
}

// Record-copying premeasurement: |x>|blank> -> |x>|record:x>. The recorder
// factor must be entirely on its blank (first) label, and offers one
// non-blank label per declared outcome, in order.
inline StateVector premeasure(const StateVector& state,
                              const ObservableBasis& basis,
                              const std::string& recorder) {
  const ProductSpace& space = *state.space;
  std::size_t rec_pos = space.factor_position(recorder);
  const FactorSpace& rec = space.factors()[rec_pos];
  for (const auto& t : basis.target_factors)
    if (t == recorder)
      throw error("recorder '" + recorder + "' cannot be a measured factor");

  for (std::size_t i = 0; i < state.amps.size(); ++i)
    if (std::abs(state.amps[i]) > kNumericTol && space.digit(i, rec_pos) != 0)
      throw error("agent already holds a record: factor '" + recorder +
                  "' is not blank");

  ObservableBasis full = complete_basis(basis, space);
  if (rec.dim() < full.declared_count() + 1)
    throw error("recorder '" + recorder + "' needs one label per outcome of '" +
                basis.name + "' plus blank");

  StateVector out{state.space, std::vector<Complex>(space.dim(), 0.0),
                  std::nullopt};
  bool track_exact = state.has_exact();
  for (const auto& o : full.outcomes)
    if (!o.synthetic && !o.exact.has_value()) track_exact = false;
  if (track_exact) out.exact = std::vector<ExactAmp>(space.dim());

  std::size_t rec_stride = space.stride(rec_pos);
  std::size_t k = 0;
  double leak_sq = 0.0;
  for (const auto& o : full.outcomes) {
    StateVector comp = project_component(state, full, o);
    if (o.synthetic) {
      leak_sq += comp.norm_sq();
      continue;
    }
    ++k;  // record label index for this outcome
    for (std::size_t i = 0; i < comp.amps.size(); ++i) {
      if (comp.amps[i] == Complex(0.0) &&
          (!track_exact || (*comp.exact)[i].is_zero()))
        continue;
      std::size_t j = i + k * rec_stride;  // blank digit -> record digit
      out.amps[j] += comp.amps[i];
      if (track_exact && comp.has_exact()) (*out.exact)[j] += (*comp.exact)[i];
    }
    if (track_exact && !comp.has_exact()) track_exact = false;
  }
  if (std::sqrt(leak_sq) > kNumericTol)
    throw error("state leaks outside the declared outcomes of basis '" +
                basis.name + "' (norm " + format_double(std::sqrt(leak_sq)) +
                ")");
  if (!track_exact) out.drop_exact();
  if (out.has_exact()) out.sync_from_exact();
  return out;
}

// Block-diagonal controlled unitary: one case unitary per control label;
// missing cases default to identity.
inline StateVector controlled_unitary(
    const StateVector& state, const std::string& control,
    const std::map<std::string, Matrix>& case_map,
    const std::vector<std::string>& targets,
    const std::map<std::string, ExactMatrix>* exact_cases = nullptr) {
  const ProductSpace& space = *state.space;
  std::size_t ctl_pos = space.factor_position(control);
  const FactorSpace& ctl = space.factors()[ctl_pos];
  for (const auto& t : targets)
    if (t == control)
      throw error("control factor '" + control + "' overlaps the targets");
  for (const auto& [label, u] : case_map) {
    if (!ctl.has_label(label))
      throw error("control case '" + label + "' is not a basis label of '" +
                  control + "'");
    double dev = unitarity_deviation(u);
    if (dev > kNumericTol)
      throw error("case '" + label + "' is not unitary (deviation " +
                  std::to_string(dev) + ")");
  }

  detail::TargetLayout layout(space, targets);
  StateVector out = state;
  bool track_exact = state.has_exact();
  if (track_exact) {
    for (const auto& [label, u] : case_map) {
      if (!exact_cases || !exact_cases->count(label)) track_exact = false;
    }
  }
  if (!track_exact) out.drop_exact();

  std::vector<std::size_t> offsets(layout.sub_dim);
  for (std::size_t s = 0; s < layout.sub_dim; ++s)
    offsets[s] = layout.offset(space, s);

  for (std::size_t block : layout.blocks(space)) {
    std::size_t ctl_digit = space.digit(block, ctl_pos);
    auto it = case_map.find(ctl.basis_labels[ctl_digit]);
    if (it == case_map.end()) continue;  // identity case
    const Matrix& u = it->second;
    if (u.size() != layout.sub_dim)
      throw error("case '" + it->first + "' has wrong dimension");
    std::vector<Complex> in(layout.sub_dim);
    for (std::size_t s = 0; s < layout.sub_dim; ++s)
      in[s] = state.amps[block + offsets[s]];
    for (std::size_t i = 0; i < layout.sub_dim; ++i) {
      Complex acc = 0.0;
      for (std::size_t j = 0; j < layout.sub_dim; ++j) acc += u[i][j] * in[j];
      out.amps[block + offsets[i]] = acc;
    }
    if (track_exact) {
      const ExactMatrix& eu = exact_cases->at(it->first);
      std::vector<ExactAmp> ein(layout.sub_dim);
      for (std::size_t s = 0; s < layout.sub_dim; ++s)
        ein[s] = (*state.exact)[block + offsets[s]];
      for (std::size_t i = 0; i < layout.sub_dim; ++i) {
        ExactAmp acc;
        for (std::size_t j = 0; j < layout.sub_dim; ++j)
          acc += eu[i][j] * ein[j];
        (*out.exact)[block + offsets[i]] = acc;
      }
    }
  }
  if (out.has_exact()) out.sync_from_exact();
  return out;
}

// Probabilities of noise magnitude are clamped to zero; anything more
// negative is an internal error, not rounding.
inline double clamp_probability(double p) {
  if (p < -1e-12)
    throw error("negative probability " + format_double(p));
  return p < 0.0 ? 0.0 : p;
}

struct OutcomeWeight {
  double p = 0.0;
  std::optional<Rational> p_exact;
};

// Born probabilities over a (completed) basis.
inline std::map<std::string, OutcomeWeight> born_distribution(
    const StateVector& state, const ObservableBasis& basis) {
  std::map<std::string, OutcomeWeight> out;
  double sum = 0.0;
  for (const auto& c : expand_in_basis(state, basis)) {
    if (c.component.space->dim() == 0) continue;
    OutcomeWeight w;
    w.p = clamp_probability(c.weight);
    w.p_exact = c.weight_exact;
    sum += w.p;
    out[c.outcome] = w;
  }
  if (std::abs(sum - 1.0) > kNumericTol)
    throw error("born probabilities sum to " + format_double(sum));
  return out;
}

// Von Neumann projection onto one outcome, renormalized.
inline StateVector project(const StateVector& state,
                           const ObservableBasis& basis,
                           const std::string& outcome) {
  ObservableBasis full = complete_basis(basis, *state.space);
  StateVector comp = project_component(state, full, full.outcome(outcome));
  double p = comp.norm_sq();
  if (p <= 1e-12)
    throw error("branch does not exist: outcome '" + outcome +
                "' has zero probability");
  auto p_exact = exact_norm_sq(comp);
  if (comp.has_exact() && p_exact) {
    ExactAmp inv = ExactAmp(1) / ExactAmp::sqrt_of(*p_exact);
    for (auto& e : *comp.exact) e *= inv;
    comp.sync_from_exact();
  } else {
    comp.drop_exact();
    double n = std::sqrt(p);
    for (auto& a : comp.amps) a /= n;
  }
  return comp;
}

// Outcome-tuple probabilities over named variables.
struct JointEntry {
  double p = 0.0;
  std::optional<Rational> p_exact;
};

struct JointDistribution {
  std::vector<std::string> variables;
  std::map<std::vector<std::string>, JointEntry> table;

  double total() const {
    double s = 0.0;
    for (const auto& [k, e] : table) s += e.p;
    return s;
  }

  std::size_t var_index(const std::string& v) const {
    for (std::size_t i = 0; i < variables.size(); ++i)
      if (variables[i] == v) return i;
    throw error("joint distribution has no variable '" + v + "'");
  }
  bool has_variable(const std::string& v) const {
    for (const auto& x : variables)
      if (x == v) return true;
    return false;
  }

  void add(const std::vector<std::string>& outcome, double p,
           std::optional<Rational> p_exact) {
    auto [it, fresh] = table.try_emplace(outcome);
    JointEntry& e = it->second;
    e.p += clamp_probability(p);
    if (fresh)
      e.p_exact = p_exact;
    else if (e.p_exact && p_exact)
      e.p_exact = *e.p_exact + *p_exact;
    else
      e.p_exact.reset();
  }

  JointDistribution marginal(const std::vector<std::string>& vars) const {
    std::vector<std::size_t> idx;
    for (const auto& v : vars) idx.push_back(var_index(v));
    JointDistribution out;
    out.variables = vars;
    for (const auto& [key, e] : table) {
      std::vector<std::string> sub;
      for (std::size_t i : idx) sub.push_back(key[i]);
      auto& dst = out.table[sub];
      dst.p += e.p;
      if (dst.p == e.p)
        dst.p_exact = e.p_exact;
      else if (dst.p_exact && e.p_exact)
        dst.p_exact = *dst.p_exact + *e.p_exact;
      else
        dst.p_exact.reset();
    }
    return out;
  }

  // Probability of a conjunction of var=label constraints.
  double prob_of(const std::map<std::string, std::string>& assign) const {
    double s = 0.0;
    for (const auto& [key, e] : table) {
      bool match = true;
      for (const auto& [v, label] : assign)
        if (key[var_index(v)] != label) {
          match = false;
          break;
        }
      if (match) s += e.p;
    }
    return s;
  }

  nlohmann::json to_json(bool with_exact = true) const {
    nlohmann::json j;
    j["variables"] = variables;
    j["table"] = nlohmann::json::array();
    for (const auto& [key, e] : table) {
      nlohmann::json row;
      row["outcome"] = key;
      row["p"] = e.p;
      if (with_exact)
        row["p_exact"] =
            e.p_exact ? nlohmann::json(e.p_exact->str()) : nlohmann::json();
      j["table"].push_back(row);
    }
    return j;
  }
};

// One protocol step for the sequential-projector formula. A step with a
// variable name contributes a projector family (its outcome enters the
// joint); a step with only a recorder is a coherent premeasurement; a bare
// unitary step is inter-measurement evolution.
struct MeasurementStep {
  enum class Kind { kUnitary, kControlled, kPremeasure, kMeasure };
  Kind kind = Kind::kMeasure;

  // kUnitary
  Matrix matrix;
  std::vector<std::string> targets;
  std::optional<ExactMatrix> exact_matrix;

  // kControlled
  std::string control;
  std::map<std::string, Matrix> cases;
  std::optional<std::map<std::string, ExactMatrix>> exact_cases;

  // kPremeasure / kMeasure
  ObservableBasis basis;
  std::optional<std::string> recorder;

  // kMeasure
  std::string variable;
  bool collapse = false;
  std::optional<std::string> selected_outcome;
};

namespace detail {

inline void sequential_walk(const StateVector& state,
                            const std::vector<MeasurementStep>& steps,
                            std::size_t step_idx,
                            std::vector<std::string>& outcome,
                            JointDistribution& joint) {
  if (step_idx == steps.size()) {
    double p = state.norm_sq();
    joint.add(outcome, p, exact_norm_sq(state));
    return;
  }
  const MeasurementStep& s = steps[step_idx];
  switch (s.kind) {
    case MeasurementStep::Kind::kUnitary:
      sequential_walk(apply_unitary(state, s.matrix, s.targets,
                                    s.exact_matrix ? &*s.exact_matrix
                                                   : nullptr),
                      steps, step_idx + 1, outcome, joint);
      return;
    case MeasurementStep::Kind::kControlled:
      sequential_walk(controlled_unitary(state, s.control, s.cases, s.targets,
                                         s.exact_cases ? &*s.exact_cases
                                                       : nullptr),
                      steps, step_idx + 1, outcome, joint);
      return;
    case MeasurementStep::Kind::kPremeasure:
      sequential_walk(premeasure(state, s.basis, *s.recorder), steps,
                      step_idx + 1, outcome, joint);
      return;
    case MeasurementStep::Kind::kMeasure: {
      ObservableBasis full = complete_basis(s.basis, *state.space);
      std::size_t rec_pos = 0, rec_stride = 0;
      if (s.recorder) {
        rec_pos = state.space->factor_position(*s.recorder);
        rec_stride = state.space->stride(rec_pos);
        for (std::size_t i = 0; i < state.amps.size(); ++i)
          if (std::abs(state.amps[i]) > kNumericTol &&
              state.space->digit(i, rec_pos) != 0)
            throw error("agent already holds a record: factor '" + *s.recorder +
                        "' is not blank");
      }
      std::size_t k = 0;
      for (const auto& o : full.outcomes) {
        std::size_t record_digit = o.synthetic ? 0 : ++k;
        if (s.selected_outcome && o.label != *s.selected_outcome) continue;
        StateVector comp = project_component(state, full, o);
        if (o.synthetic) {
          if (comp.norm_sq() > kNumericTol)
            throw error("state leaks outside the declared outcomes of basis '" +
                        s.basis.name + "'");
          continue;
        }
        if (s.recorder && record_digit != 0) {
          // write the record: blank digit -> this outcome's label
          StateVector shifted{comp.space,
                              std::vector<Complex>(comp.amps.size(), 0.0),
                              std::nullopt};
          if (comp.has_exact())
            shifted.exact = std::vector<ExactAmp>(comp.amps.size());
          for (std::size_t i = 0; i < comp.amps.size(); ++i) {
            if (comp.amps[i] == Complex(0.0)) continue;
            shifted.amps[i + record_digit * rec_stride] = comp.amps[i];
            if (shifted.has_exact())
              (*shifted.exact)[i + record_digit * rec_stride] =
                  (*comp.exact)[i];
          }
          comp = std::move(shifted);
        }
        outcome.push_back(o.label);
        sequential_walk(comp, steps, step_idx + 1, outcome, joint);
        outcome.pop_back();
      }
      return;
    }
  }
}

}  // namespace detail

// Joint outcome probabilities via time-ordered, symmetrically embedded
// projectors around the initial state: P(a,b,...) = <Psi|Pa Pb ... Pb Pa|Psi>.
// Unnormalized components are propagated, so the final squared norm is the
// joint probability; postselected steps condition the result.
inline JointDistribution sequential_joint_distribution(
    const StateVector& initial, const std::vector<MeasurementStep>& steps) {
  JointDistribution joint;
  for (const auto& s : steps)
    if (s.kind == MeasurementStep::Kind::kMeasure)
      joint.variables.push_back(s.variable);
  std::vector<std::string> outcome;
  detail::sequential_walk(initial, steps, 0, outcome, joint);
  double total = joint.total();
  if (total <= 1e-12) throw error("all branches have zero probability");
  if (std::abs(total - 1.0) > 1e-9) {
    for (auto& [k, e] : joint.table) {
      e.p /= total;
      e.p_exact.reset();  // renormalized; exact form recomputed by callers
    }
  }
  return joint;
}

}  // namespace wigner
