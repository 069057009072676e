#include "tmilstein/rational.hpp"

#include <cmath>
#include <limits>

namespace tmil {
namespace {

__int128 gcd128(__int128 a, __int128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    const __int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

}  // namespace

void Rational::assign(__int128 num, __int128 den) {
  if (den == 0) throw std::domain_error("Rational: zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const __int128 g = gcd128(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  constexpr auto lo = std::numeric_limits<std::int64_t>::min();
  constexpr auto hi = std::numeric_limits<std::int64_t>::max();
  if (num < lo || num > hi || den > hi) throw std::overflow_error("Rational: 64-bit overflow");
  num_ = static_cast<std::int64_t>(num);
  den_ = static_cast<std::int64_t>(den);
}

Rational Rational::from_double(double value, std::int64_t max_den, double tol) {
  if (!std::isfinite(value)) throw std::domain_error("Rational::from_double: non-finite value");
  // Convergents h/k of the continued fraction of value.
  __int128 h_prev = 1, h = static_cast<__int128>(std::floor(value));
  __int128 k_prev = 0, k = 1;
  double frac = value - std::floor(value);
  while (std::abs(value - static_cast<double>(h) / static_cast<double>(k)) > tol && frac > 0.0) {
    const double inv = 1.0 / frac;
    const double a = std::floor(inv);
    frac = inv - a;
    const __int128 ai = static_cast<__int128>(a);
    const __int128 h_next = ai * h + h_prev;
    const __int128 k_next = ai * k + k_prev;
    if (k_next > max_den) break;
    h_prev = h;
    k_prev = k;
    h = h_next;
    k = k_next;
  }
  Rational r;
  r.assign(h, k);
  return r;
}

std::string Rational::str() const {
  return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_);
}

Rational operator+(const Rational& a, const Rational& b) {
  Rational r;
  r.assign(static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_,
           static_cast<__int128>(a.den_) * b.den_);
  return r;
}

Rational operator-(const Rational& a, const Rational& b) { return a + Rational(-b.num_, b.den_); }

Rational operator*(const Rational& a, const Rational& b) {
  Rational r;
  r.assign(static_cast<__int128>(a.num_) * b.num_, static_cast<__int128>(a.den_) * b.den_);
  return r;
}

Rational operator/(const Rational& a, const Rational& b) {
  Rational r;
  r.assign(static_cast<__int128>(a.num_) * b.den_, static_cast<__int128>(a.den_) * b.num_);
  return r;
}

bool operator<(const Rational& a, const Rational& b) {
  return static_cast<__int128>(a.num_) * b.den_ < static_cast<__int128>(b.num_) * a.den_;
}

}  // namespace tmil
