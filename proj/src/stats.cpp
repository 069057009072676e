#include "tmilstein/stats.hpp"

#include <cmath>
#include <string>

#include "tmilstein/errors.hpp"

namespace tmil {

MeanEstimate mean_and_se(std::span<const double> values) {
  MeanEstimate est;
  const std::size_t n = values.size();
  if (n == 0) return est;
  double sum = 0.0;
  for (double v : values) sum += v;
  est.mean = sum / static_cast<double>(n);
  if (n < 2) return est;
  double ss = 0.0;
  for (double v : values) ss += (v - est.mean) * (v - est.mean);
  est.se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  return est;
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw PreconditionError("least_squares: need >= 2 paired points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw PreconditionError("least_squares: x values are all equal");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      rss += r * r;
    }
    fit.slope_se = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return fit;
}

std::size_t integer_ratio(double num, double den, const char* what) {
  const double ratio = num / den;
  const double k = std::round(ratio);
  if (!(k >= 1.0) || std::abs(ratio - k) > 1e-9 * ratio)
    throw PreconditionError(std::string(what) + " must be a positive integer");
  return static_cast<std::size_t>(k);
}

}  // namespace tmil
