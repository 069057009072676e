#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace tmil {

/// Exact rational with 64-bit numerator/denominator, always normalized
/// (gcd 1, positive denominator). Arithmetic throws std::overflow_error
/// instead of wrapping.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1) { assign(num, den); }

  /// Best rational approximation with denominator <= max_den via continued
  /// fractions, stopping once |value - p/q| <= tol.
  static Rational from_double(double value, std::int64_t max_den = 1'000'000, double tol = 1e-12);

  std::int64_t num() const noexcept { return num_; }
  std::int64_t den() const noexcept { return den_; }
  double to_double() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }
  std::string str() const;

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  friend Rational operator/(const Rational& a, const Rational& b);
  friend bool operator==(const Rational& a, const Rational& b) = default;
  friend bool operator<(const Rational& a, const Rational& b);

 private:
  void assign(__int128 num, __int128 den);

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

inline Rational min(const Rational& a, const Rational& b) { return b < a ? b : a; }

}  // namespace tmil
