#pragma once

#include <cstddef>
#include <span>

namespace tmil {

struct MeanEstimate {
  double mean = 0.0;
  /// Standard error of the mean (sample standard deviation / sqrt(n)); 0 for n < 2.
  double se = 0.0;
};

/// Two-pass mean and standard error, accumulated in index order.
MeanEstimate mean_and_se(std::span<const double> values);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  /// Residual-based standard error of the slope; 0 for exactly two points.
  double slope_se = 0.0;
};

/// Ordinary least squares y = intercept + slope x. Requires >= 2 points with
/// distinct x.
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

/// k = round(num / den) as a positive integer, throwing PreconditionError
/// (mentioning `what`) unless num / den is within 1e-9 relative of k.
std::size_t integer_ratio(double num, double den, const char* what);

}  // namespace tmil
