#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "wigner/exact.hpp"

namespace wigner {

using Complex = std::complex<double>;

inline constexpr double kNumericTol = 1e-10;

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One labeled tensor factor: a coin, a spin, or an agent memory register.
struct FactorSpace {
  std::string label;
  std::vector<std::string> basis_labels;

  std::size_t dim() const { return basis_labels.size(); }

  std::size_t index_of(const std::string& basis_label) const {
    for (std::size_t i = 0; i < basis_labels.size(); ++i)
      if (basis_labels[i] == basis_label) return i;
    throw error("factor '" + label + "' has no basis label '" + basis_label +
                "'");
  }
  bool has_label(const std::string& basis_label) const {
    return std::find(basis_labels.begin(), basis_labels.end(), basis_label) !=
           basis_labels.end();
  }
};

inline FactorSpace make_factor(std::string label,
                               std::vector<std::string> basis_labels) {
  if (basis_labels.size() < 2)
    throw error("factor '" + label + "' needs dimension >= 2");
  std::set<std::string> seen;
  for (const auto& l : basis_labels)
    if (!seen.insert(l).second)
      throw error("factor '" + label + "' repeats basis label '" + l + "'");
  return FactorSpace{std::move(label), std::move(basis_labels)};
}

// Ordered tensor product of factors. Basis indexing is mixed-radix with the
// first declared factor most significant, so dumps read in ket order.
class ProductSpace {
 public:
  explicit ProductSpace(std::vector<FactorSpace> factors)
      : factors_(std::move(factors)) {
    std::set<std::string> seen;
    for (const auto& f : factors_)
      if (!seen.insert(f.label).second)
        throw error("duplicate factor label '" + f.label + "'");
    dim_ = 1;
    strides_.assign(factors_.size(), 0);
    for (std::size_t i = factors_.size(); i-- > 0;) {
      strides_[i] = dim_;
      dim_ *= factors_[i].dim();
    }
  }

  std::size_t dim() const { return dim_; }
  const std::vector<FactorSpace>& factors() const { return factors_; }
  std::size_t factor_count() const { return factors_.size(); }

  std::size_t factor_position(const std::string& label) const {
    for (std::size_t i = 0; i < factors_.size(); ++i)
      if (factors_[i].label == label) return i;
    throw error("unknown factor '" + label + "'");
  }
  const FactorSpace& factor(const std::string& label) const {
    return factors_[factor_position(label)];
  }

  std::size_t digit(std::size_t index, std::size_t pos) const {
    return (index / strides_[pos]) % factors_[pos].dim();
  }

  std::vector<std::size_t> digits(std::size_t index) const {
    std::vector<std::size_t> out(factors_.size());
    for (std::size_t i = 0; i < factors_.size(); ++i) out[i] = digit(index, i);
    return out;
  }

  std::size_t index(const std::vector<std::size_t>& digits) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < factors_.size(); ++i)
      idx += digits[i] * strides_[i];
    return idx;
  }

  // One basis label per factor, in declaration order.
  std::size_t index_of_labels(const std::vector<std::string>& labels) const {
    if (labels.size() != factors_.size())
      throw error("expected one label per factor");
    std::vector<std::size_t> d(factors_.size());
    for (std::size_t i = 0; i < factors_.size(); ++i)
      d[i] = factors_[i].index_of(labels[i]);
    return index(d);
  }

  std::vector<std::string> labels_of_index(std::size_t index) const {
    std::vector<std::string> out(factors_.size());
    for (std::size_t i = 0; i < factors_.size(); ++i)
      out[i] = factors_[i].basis_labels[digit(index, i)];
    return out;
  }

  std::size_t stride(std::size_t pos) const { return strides_[pos]; }

 private:
  std::vector<FactorSpace> factors_;
  std::vector<std::size_t> strides_;
  std::size_t dim_ = 1;
};

using SpacePtr = std::shared_ptr<const ProductSpace>;

inline SpacePtr make_product_space(std::vector<FactorSpace> factors) {
  return std::make_shared<const ProductSpace>(std::move(factors));
}

// Complex amplitudes over the product computational basis. Immutable by
// convention: all operations return fresh values. A parallel array of exact
// q*sqrt(r) amplitudes is carried along while every operation stays within
// the exact closed form, and dropped otherwise.
struct StateVector {
  SpacePtr space;
  std::vector<Complex> amps;
  std::optional<std::vector<ExactAmp>> exact;

  double norm_sq() const {
    double s = 0.0;
    for (const auto& a : amps) s += std::norm(a);
    return s;
  }
  double norm() const { return std::sqrt(norm_sq()); }

  bool has_exact() const { return exact.has_value(); }

  void drop_exact() { exact.reset(); }

  // Refresh doubles from the exact side so both views agree bit-for-bit.
  void sync_from_exact() {
    if (!exact) return;
    for (std::size_t i = 0; i < amps.size(); ++i)
      amps[i] = Complex((*exact)[i].value(), 0.0);
  }
};

inline Complex inner_product(const StateVector& a, const StateVector& b) {
  if (a.space != b.space && a.space->dim() != b.space->dim())
    throw error("inner product of states on different spaces");
  Complex s = 0.0;
  for (std::size_t i = 0; i < a.amps.size(); ++i)
    s += std::conj(a.amps[i]) * b.amps[i];
  return s;
}

inline StateVector basis_state(SpacePtr space,
                               const std::vector<std::string>& labels) {
  StateVector st{space, std::vector<Complex>(space->dim(), Complex(0.0)),
                 std::vector<ExactAmp>(space->dim())};
  std::size_t idx = space->index_of_labels(labels);
  st.amps[idx] = 1.0;
  (*st.exact)[idx] = ExactAmp(1);
  return st;
}

struct SuperposeTerm {
  ExactAmp coefficient;
  std::vector<std::string> labels;  // one per factor
};

// Builds a normalized state from exact-coefficient terms; the terms are the
// ket expansions written in the protocols, so normalization is exact too.
inline StateVector superpose(SpacePtr space,
                             const std::vector<SuperposeTerm>& terms) {
  StateVector st{space, std::vector<Complex>(space->dim(), Complex(0.0)),
                 std::vector<ExactAmp>(space->dim())};
  for (const auto& t : terms) {
    std::size_t idx = space->index_of_labels(t.labels);
    (*st.exact)[idx] += t.coefficient;
  }
  ExactAmp nsq;
  for (const auto& e : *st.exact) nsq += e.squared();
  auto nsq_rat = nsq.as_rational();
  if (nsq.is_zero() || nsq.value() <= 0.0)
    throw error("superposition sums to the zero vector");
  if (nsq_rat) {
    if (!(*nsq_rat == Rational(1))) {
      ExactAmp inv_norm = ExactAmp(1) / ExactAmp::sqrt_of(*nsq_rat);
      for (auto& e : *st.exact) e *= inv_norm;
    }
    st.sync_from_exact();
  } else {
    // Norm^2 not rational: normalize in floating point, drop exact view.
    st.sync_from_exact();
    double n = st.norm();
    for (auto& a : st.amps) a /= n;
    st.drop_exact();
  }
  return st;
}

using Matrix = std::vector<std::vector<Complex>>;
using ExactMatrix = std::vector<std::vector<ExactAmp>>;

inline double unitarity_deviation(const Matrix& u) {
  std::size_t n = u.size();
  double dev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (u[i].size() != n) return 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      Complex s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += std::conj(u[k][i]) * u[k][j];
      dev = std::max(dev, std::abs(s - (i == j ? Complex(1.0) : Complex(0.0))));
    }
  }
  return dev;
}

namespace detail {

// Enumerates the full basis as (block, sub) where `sub` runs over the mixed-
// radix subspace of the target factors (first target most significant) and
// `block` fixes every non-target digit.
struct TargetLayout {
  std::vector<std::size_t> target_pos;
  std::vector<std::size_t> sub_strides;  // stride in full space per sub index
  std::size_t sub_dim = 1;

  TargetLayout(const ProductSpace& space,
               const std::vector<std::string>& targets) {
    std::set<std::size_t> seen;
    for (const auto& t : targets) {
      std::size_t p = space.factor_position(t);
      if (!seen.insert(p).second)
        throw error("duplicate target factor '" + t + "'");
      target_pos.push_back(p);
    }
    for (std::size_t p : target_pos) sub_dim *= space.factors()[p].dim();
  }

  // Maps sub-index digits onto an offset in the full space.
  std::size_t offset(const ProductSpace& space, std::size_t sub) const {
    std::size_t off = 0;
    for (std::size_t i = target_pos.size(); i-- > 0;) {
      std::size_t p = target_pos[i];
      std::size_t d = sub % space.factors()[p].dim();
      sub /= space.factors()[p].dim();
      off += d * space.stride(p);
    }
    return off;
  }

  // All full-space indices whose target digits are zero.
  std::vector<std::size_t> blocks(const ProductSpace& space) const {
    std::set<std::size_t> targets(target_pos.begin(), target_pos.end());
    std::vector<std::size_t> out;
    for (std::size_t idx = 0; idx < space.dim(); ++idx) {
      bool zero = true;
      for (std::size_t p : targets)
        if (space.digit(idx, p) != 0) {
          zero = false;
          break;
        }
      if (zero) out.push_back(idx);
    }
    return out;
  }
};

}  // namespace detail

// Applies a unitary acting on the listed target factors, identity elsewhere.
// The matrix is indexed in the mixed-radix basis of the targets in the order
// given. An exact matrix may be supplied to keep the exact amplitude view.
inline StateVector apply_unitary(const StateVector& state, const Matrix& u,
                                 const std::vector<std::string>& targets,
                                 const ExactMatrix* exact_u = nullptr) {
  detail::TargetLayout layout(*state.space, targets);
  if (u.size() != layout.sub_dim)
    throw error("unitary dimension " + std::to_string(u.size()) +
                " does not match target subspace dimension " +
                std::to_string(layout.sub_dim));
  double dev = unitarity_deviation(u);
  if (dev > kNumericTol)
    throw error("matrix is not unitary (deviation " + std::to_string(dev) +
                ")");

  StateVector out{state.space, std::vector<Complex>(state.space->dim(), 0.0),
                  std::nullopt};
  bool track_exact = state.has_exact() && exact_u != nullptr;
  if (track_exact)
    out.exact = std::vector<ExactAmp>(state.space->dim());

  std::vector<std::size_t> offsets(layout.sub_dim);
  for (std::size_t s = 0; s < layout.sub_dim; ++s)
    offsets[s] = layout.offset(*state.space, s);

  for (std::size_t block : layout.blocks(*state.space)) {
    for (std::size_t i = 0; i < layout.sub_dim; ++i) {
      Complex acc = 0.0;
      for (std::size_t j = 0; j < layout.sub_dim; ++j)
        acc += u[i][j] * state.amps[block + offsets[j]];
      out.amps[block + offsets[i]] = acc;
      if (track_exact) {
        ExactAmp eacc;
        for (std::size_t j = 0; j < layout.sub_dim; ++j)
          eacc += (*exact_u)[i][j] * (*state.exact)[block + offsets[j]];
        (*out.exact)[block + offsets[i]] = eacc;
      }
    }
  }
  if (track_exact) out.sync_from_exact();
  return out;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v == 0.0 ? 0.0 : v);
  return buf;
}

// One line per nonzero amplitude: `<label-tuple> <re> <im> [<exact-expr>]`,
// labels joined by `⊗`, sorted by basis index.
inline std::string dump_state(const StateVector& state,
                              double threshold = 1e-12) {
  std::string out;
  for (std::size_t i = 0; i < state.amps.size(); ++i) {
    if (std::abs(state.amps[i]) <= threshold) continue;
    auto labels = state.space->labels_of_index(i);
    std::string line;
    for (std::size_t k = 0; k < labels.size(); ++k) {
      if (k) line += "⊗";
      line += labels[k];
    }
    line += " " + format_double(state.amps[i].real());
    line += " " + format_double(state.amps[i].imag());
    if (state.has_exact()) line += " [" + (*state.exact)[i].str() + "]";
    out += line + "\n";
  }
  return out;
}

}  // namespace wigner
