#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tmil {

/// Stateless counter-based generator: every draw is a pure function of its
/// logical coordinates (seed, path, step, driver), so ensembles can be split
/// across workers in any order and stay bit-identical.
std::uint64_t counter_bits(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t driver);

/// Uniform in the open interval (0, 1) from the top 53 bits of counter_bits.
double counter_uniform(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t driver);

/// Standard normal by inverse CDF of counter_uniform.
double counter_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t driver);

/// Sum of `count` values spaced `stride` apart in a canonical order: blocks of
/// the largest power of two dividing `count` are summed as balanced binary
/// trees, and block sums are added left to right. Coarsening by powers of two
/// therefore commutes with summation bit-exactly.
double canonical_sum(const double* first, std::size_t count, std::size_t stride = 1);

/// Brownian increments on a uniform grid of [0, t_final] for m drivers.
class BrownianGrid {
 public:
  /// N(0, t_final / n_fine) increments keyed by (master_seed, path_index, step, driver).
  /// Throws PreconditionError if n_fine == 0, m == 0 or t_final <= 0.
  static BrownianGrid generate(std::uint64_t master_seed, std::uint64_t path_index, std::size_t m, double t_final,
                               std::size_t n_fine);

  /// Grid with `factor` consecutive increments merged by canonical_sum.
  /// Throws PreconditionError unless factor >= 1 divides steps().
  BrownianGrid coarsen(std::size_t factor) const;

  std::size_t drivers() const noexcept { return m_; }
  std::size_t steps() const noexcept { return n_; }
  double t_final() const noexcept { return t_final_; }
  double dt() const noexcept { return t_final_ / static_cast<double>(n_); }
  std::uint64_t master_seed() const noexcept { return seed_; }
  std::uint64_t path_index() const noexcept { return path_; }
  /// Number of generated increments merged into each increment of this grid.
  std::size_t aggregation() const noexcept { return aggregation_; }

  /// The m increments of step k.
  std::span<const double> increment(std::size_t k) const { return {data_.data() + k * m_, m_}; }
  /// Row-major steps() x drivers() increments.
  std::span<const double> increments() const noexcept { return data_; }

  /// B(t_final) per driver, the canonical sum of every increment.
  std::vector<double> terminal_value() const;

 private:
  BrownianGrid() = default;

  std::size_t m_ = 0;
  std::size_t n_ = 0;
  double t_final_ = 0.0;
  std::uint64_t seed_ = 0;
  std::uint64_t path_ = 0;
  std::size_t aggregation_ = 1;
  std::vector<double> data_;
};

}  // namespace tmil
