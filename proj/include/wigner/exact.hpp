#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "wigner/rational.hpp"

namespace wigner {

// Exact real number of the form  sum_i  q_i * sqrt(m_i)  with q_i rational
// and m_i square-free positive integers. Closed under +, -, * and under
// division by a single-term value, which covers every amplitude appearing in
// the protocols (1/sqrt(3), sqrt(2/3), 1/sqrt(12), ...) as well as the
// renormalization steps that divide by the square root of a rational.
class ExactAmp {
 public:
  ExactAmp() = default;
  ExactAmp(Rational q) { add_term(q, 1); }
  ExactAmp(std::int64_t n) : ExactAmp(Rational(n)) {}

  // q * sqrt(r) with r a non-negative rational.
  static ExactAmp sqrt_term(Rational q, Rational r) {
    if (r.sign() < 0)
      throw std::domain_error("sqrt of negative rational in exact amplitude");
    // sqrt(a/b) = sqrt(a*b)/b
    ExactAmp out;
    std::int64_t radicand = r.num() * r.den();
    out.add_term(q * Rational(1, r.den()), radicand);
    return out;
  }
  static ExactAmp sqrt_of(Rational r) { return sqrt_term(Rational(1), r); }

  bool is_zero() const { return terms_.empty(); }
  bool is_rational() const {
    return terms_.empty() ||
           (terms_.size() == 1 && terms_.begin()->first == 1);
  }
  std::optional<Rational> as_rational() const {
    if (terms_.empty()) return Rational(0);
    if (is_rational()) return terms_.begin()->second;
    return std::nullopt;
  }

  double value() const {
    double v = 0.0;
    for (const auto& [m, q] : terms_)
      v += q.value() * std::sqrt(static_cast<double>(m));
    return v;
  }

  ExactAmp operator-() const {
    ExactAmp out;
    for (const auto& [m, q] : terms_) out.terms_.emplace(m, -q);
    return out;
  }

  friend ExactAmp operator+(const ExactAmp& a, const ExactAmp& b) {
    ExactAmp out = a;
    for (const auto& [m, q] : b.terms_) out.add_term(q, m);
    return out;
  }
  friend ExactAmp operator-(const ExactAmp& a, const ExactAmp& b) {
    return a + (-b);
  }
  friend ExactAmp operator*(const ExactAmp& a, const ExactAmp& b) {
    ExactAmp out;
    for (const auto& [ma, qa] : a.terms_)
      for (const auto& [mb, qb] : b.terms_) out.add_term(qa * qb, ma * mb);
    return out;
  }
  ExactAmp& operator+=(const ExactAmp& o) { return *this = *this + o; }
  ExactAmp& operator-=(const ExactAmp& o) { return *this = *this - o; }
  ExactAmp& operator*=(const ExactAmp& o) { return *this = *this * o; }

  // Division by a single-term value q*sqrt(m); throws if the divisor has
  // several radical classes (never needed here) or is zero.
  friend ExactAmp operator/(const ExactAmp& a, const ExactAmp& b) {
    if (b.is_zero()) throw std::domain_error("exact division by zero");
    if (b.terms_.size() != 1)
      throw std::domain_error("exact division by multi-term value");
    auto [m, q] = *b.terms_.begin();
    ExactAmp out;
    for (const auto& [ma, qa] : a.terms_)
      out.add_term(qa / (q * Rational(m)), ma * m);
    return out;
  }

  // this * this; always representable, rational iff single radical class.
  ExactAmp squared() const { return *this * *this; }

  // (q, m) with value q*sqrt(m), for single-term values only.
  std::pair<Rational, std::int64_t> single_term() const {
    if (terms_.empty()) return {Rational(0), 1};
    if (terms_.size() != 1)
      throw std::domain_error("multi-term exact amplitude");
    auto [m, q] = *terms_.begin();
    return {q, m};
  }

  friend bool operator==(const ExactAmp& a, const ExactAmp& b) {
    return a.terms_ == b.terms_;
  }
  friend bool operator!=(const ExactAmp& a, const ExactAmp& b) {
    return !(a == b);
  }

  std::string str() const {
    if (terms_.empty()) return "0";
    std::string out;
    bool first = true;
    for (const auto& [m, q] : terms_) {
      Rational c = q;
      if (!first) {
        out += c.sign() < 0 ? "-" : "+";
        if (c.sign() < 0) c = -c;
      }
      first = false;
      if (m == 1) {
        out += c.str();
      } else {
        if (!c.is_one()) out += c.str() + "*";
        out += "sqrt(" + std::to_string(m) + ")";
      }
    }
    return out;
  }

 private:
  void add_term(Rational q, std::int64_t radicand) {
    if (q.is_zero() || radicand == 0) {
      if (radicand == 0) return;  // q*sqrt(0) == 0
      return;
    }
    if (radicand < 0)
      throw std::domain_error("negative radicand in exact amplitude");
    // pull perfect-square factors out of the radicand
    std::int64_t square = 1;
    for (std::int64_t p = 2; p * p <= radicand; ++p) {
      while (radicand % (p * p) == 0) {
        radicand /= p * p;
        square *= p;
      }
    }
    q *= Rational(square);
    auto it = terms_.find(radicand);
    if (it == terms_.end()) {
      terms_.emplace(radicand, q);
    } else {
      it->second += q;
      if (it->second.is_zero()) terms_.erase(it);
    }
  }

  // square-free radicand -> rational coefficient
  std::map<std::int64_t, Rational> terms_;
};

}  // namespace wigner
