#include "tmilstein/halton.hpp"

#include <cmath>
#include <stdexcept>

namespace tmil {
namespace {

std::vector<unsigned> first_primes(std::size_t n) {
  std::vector<unsigned> primes;
  for (unsigned candidate = 2; primes.size() < n; ++candidate) {
    bool prime = true;
    for (unsigned p : primes) {
      if (p * p > candidate) break;
      if (candidate % p == 0) {
        prime = false;
        break;
      }
    }
    if (prime) primes.push_back(candidate);
  }
  return primes;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double radical_inverse(std::uint64_t index, unsigned base) {
  double result = 0.0;
  double scale = 1.0 / base;
  while (index > 0) {
    result += static_cast<double>(index % base) * scale;
    index /= base;
    scale /= base;
  }
  return result;
}

HaltonSequence::HaltonSequence(std::size_t dim) : bases_(first_primes(dim)) {
  if (dim == 0) throw std::invalid_argument("HaltonSequence: dim must be positive");
}

std::vector<double> HaltonSequence::next() {
  std::vector<double> point(bases_.size());
  for (std::size_t i = 0; i < bases_.size(); ++i) point[i] = radical_inverse(index_, bases_[i]);
  ++index_;
  return point;
}

std::vector<std::vector<double>> halton_ball_points(std::size_t dim, std::size_t count, double radius) {
  HaltonSequence seq(dim);
  std::vector<std::vector<double>> points;
  points.reserve(count);
  while (points.size() < count) {
    auto u = seq.next();
    for (double& x : u) x = radius * (2.0 * x - 1.0);
    if (norm(u) <= radius) points.push_back(std::move(u));
  }
  return points;
}

std::vector<std::pair<std::vector<double>, std::vector<double>>> halton_ball_pairs(std::size_t dim,
                                                                                   std::size_t count,
                                                                                   double radius) {
  HaltonSequence seq(2 * dim);
  std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
  pairs.reserve(count);
  while (pairs.size() < count) {
    const auto u = seq.next();
    std::vector<double> x(dim), y(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      x[i] = radius * (2.0 * u[i] - 1.0);
      y[i] = radius * (2.0 * u[dim + i] - 1.0);
    }
    if (norm(x) <= radius && norm(y) <= radius) pairs.emplace_back(std::move(x), std::move(y));
  }
  return pairs;
}

std::vector<std::vector<double>> halton_sphere_directions(std::size_t dim, std::size_t count) {
  if (dim == 1) return {{1.0}, {-1.0}};
  HaltonSequence seq(dim);
  std::vector<std::vector<double>> dirs;
  dirs.reserve(count);
  while (dirs.size() < count) {
    auto u = seq.next();
    for (double& x : u) x = 2.0 * x - 1.0;
    const double n = norm(u);
    if (n < 1e-3 || n > 1.0) continue;
    for (double& x : u) x /= n;
    dirs.push_back(std::move(u));
  }
  return dirs;
}

}  // namespace tmil
