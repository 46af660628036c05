#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace wigner {

// Small exact rational on int64. Denominators in this problem domain stay
// tiny (divisors of 24 or so), so no bignum backend is needed; operations
// that would overflow throw instead of wrapping.
class Rational {
 public:
  constexpr Rational() : num_(0), den_(1) {}
  constexpr Rational(std::int64_t n) : num_(n), den_(1) {}
  Rational(std::int64_t n, std::int64_t d) : num_(n), den_(d) { normalize(); }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  bool is_zero() const { return num_ == 0; }
  bool is_one() const { return num_ == 1 && den_ == 1; }
  bool is_integer() const { return den_ == 1; }
  int sign() const { return num_ == 0 ? 0 : (num_ < 0 ? -1 : 1); }

  double value() const {
    return static_cast<double>(num_) / static_cast<double>(den_);
  }

  Rational operator-() const { return Rational(-num_, den_, unchecked{}); }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return Rational(checked_add(checked_mul(a.num_, b.den_),
                                checked_mul(b.num_, a.den_)),
                    checked_mul(a.den_, b.den_));
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return a + (-b);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return Rational(checked_mul(a.num_, b.num_), checked_mul(a.den_, b.den_));
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw std::domain_error("rational division by zero");
    return Rational(checked_mul(a.num_, b.den_), checked_mul(a.den_, b.num_));
  }

  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }
  Rational& operator*=(const Rational& o) { return *this = *this * o; }
  Rational& operator/=(const Rational& o) { return *this = *this / o; }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend bool operator!=(const Rational& a, const Rational& b) {
    return !(a == b);
  }
  friend bool operator<(const Rational& a, const Rational& b) {
    return checked_mul(a.num_, b.den_) < checked_mul(b.num_, a.den_);
  }

  std::string str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
  }

 private:
  struct unchecked {};
  constexpr Rational(std::int64_t n, std::int64_t d, unchecked)
      : num_(n), den_(d) {}

  static std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_mul_overflow(a, b, &r))
      throw std::overflow_error("rational overflow in multiply");
    return r;
  }
  static std::int64_t checked_add(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_add_overflow(a, b, &r))
      throw std::overflow_error("rational overflow in add");
    return r;
  }

  void normalize() {
    if (den_ == 0) throw std::domain_error("rational with zero denominator");
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
    if (num_ == 0) den_ = 1;
  }

  std::int64_t num_;
  std::int64_t den_;
};

}  // namespace wigner
