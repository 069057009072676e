#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace tmil {

/// Van der Corput radical inverse of `index` in the given prime base.
double radical_inverse(std::uint64_t index, unsigned base);

/// Low-discrepancy Halton sequence in [0,1)^dim. Skips index 0 (the origin).
class HaltonSequence {
 public:
  explicit HaltonSequence(std::size_t dim);

  std::vector<double> next();
  std::size_t dim() const noexcept { return bases_.size(); }

 private:
  std::vector<unsigned> bases_;
  std::uint64_t index_ = 1;
};

/// `count` quasi-random points inside the closed ball of radius `radius` in R^dim,
/// obtained by scaling Halton points to the cube and rejecting those outside.
std::vector<std::vector<double>> halton_ball_points(std::size_t dim, std::size_t count, double radius);

/// `count` quasi-random pairs (x, y) with |x| <= radius and |y| <= radius, drawn
/// from a 2*dim Halton sequence on the product cube.
std::vector<std::pair<std::vector<double>, std::vector<double>>> halton_ball_pairs(std::size_t dim,
                                                                                   std::size_t count,
                                                                                   double radius);

/// `count` quasi-random unit vectors in R^dim. For dim == 1 returns {+1, -1}.
std::vector<std::vector<double>> halton_sphere_directions(std::size_t dim, std::size_t count);

}  // namespace tmil
