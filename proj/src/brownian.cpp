#include "tmilstein/brownian.hpp"

#include <cmath>

#include <boost/math/special_functions/erf.hpp>

#include "tmilstein/errors.hpp"

namespace tmil {
namespace {

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double tree_sum(const double* first, std::size_t count, std::size_t stride) {
  if (count == 1) return *first;
  const std::size_t half = count / 2;
  return tree_sum(first, half, stride) + tree_sum(first + half * stride, half, stride);
}

}  // namespace

std::uint64_t counter_bits(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t driver) {
  std::uint64_t key = mix64(seed + 0x9e3779b97f4a7c15ULL);
  key = mix64(key ^ (path * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
  key = mix64(key ^ (step * 0xaef17502108ef2d9ULL + 0x8cb92ba72f3d8dd7ULL));
  return mix64(key ^ (driver * 0xdb4f0b9175ae2165ULL + 0x4fa3b9c7e1f1c8a5ULL));
}

double counter_uniform(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t driver) {
  const std::uint64_t bits = counter_bits(seed, path, step, driver) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double counter_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t driver) {
  const double u = counter_uniform(seed, path, step, driver);
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

double canonical_sum(const double* first, std::size_t count, std::size_t stride) {
  if (count == 0) return 0.0;
  const std::size_t block = count & (~count + 1);  // largest power of two dividing count
  double total = 0.0;
  for (std::size_t start = 0; start < count; start += block) total += tree_sum(first + start * stride, block, stride);
  return total;
}

BrownianGrid BrownianGrid::generate(std::uint64_t master_seed, std::uint64_t path_index, std::size_t m,
                                   double t_final, std::size_t n_fine) {
  if (n_fine == 0) throw PreconditionError("BrownianGrid: n_fine must be >= 1");
  if (m == 0) throw PreconditionError("BrownianGrid: at least one driver required");
  if (!(t_final > 0.0)) throw PreconditionError("BrownianGrid: t_final must be positive");
  BrownianGrid grid;
  grid.m_ = m;
  grid.n_ = n_fine;
  grid.t_final_ = t_final;
  grid.seed_ = master_seed;
  grid.path_ = path_index;
  grid.data_.resize(n_fine * m);
  const double scale = std::sqrt(t_final / static_cast<double>(n_fine));
  for (std::size_t k = 0; k < n_fine; ++k)
    for (std::size_t j = 0; j < m; ++j) grid.data_[k * m + j] = scale * counter_normal(master_seed, path_index, k, j);
  return grid;
}

BrownianGrid BrownianGrid::coarsen(std::size_t factor) const {
  if (factor == 0 || n_ % factor != 0) throw PreconditionError("BrownianGrid::coarsen: factor must divide steps()");
  BrownianGrid coarse;
  coarse.m_ = m_;
  coarse.n_ = n_ / factor;
  coarse.t_final_ = t_final_;
  coarse.seed_ = seed_;
  coarse.path_ = path_;
  coarse.aggregation_ = aggregation_ * factor;
  coarse.data_.resize(coarse.n_ * m_);
  for (std::size_t k = 0; k < coarse.n_; ++k)
    for (std::size_t j = 0; j < m_; ++j)
      coarse.data_[k * m_ + j] = canonical_sum(data_.data() + k * factor * m_ + j, factor, m_);
  return coarse;
}

std::vector<double> BrownianGrid::terminal_value() const {
  std::vector<double> b(m_);
  for (std::size_t j = 0; j < m_; ++j) b[j] = canonical_sum(data_.data() + j, n_, m_);
  return b;
}

}  // namespace tmil
