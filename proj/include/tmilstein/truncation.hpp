#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tmilstein/model.hpp"
#include "tmilstein/rational.hpp"

namespace tmil {

/// coeff * u^power
struct PowerLaw {
  double coeff = 1.0;
  double power = 1.0;
};

/// The truncation pair: a strictly increasing bound omega on coefficient size
/// over balls, and a strictly decreasing step-dependent level h with
/// delta^{1/4} h(delta) <= h_bar on (0, 1].
///
/// The power-law family omega(u) = c_w u^rho, h(delta) = c_h delta^{-eps} has
/// closed-form inverses and is what every builtin experiment uses. The
/// monotone variant accepts arbitrary callables and inverts omega by bisection.
class TruncationConfig {
 public:
  using ScalarFn = std::function<double(double)>;

  /// omega(u) = u, h(delta) = delta^{-1/4}, h_bar = 1.
  TruncationConfig() = default;

  /// Throws PreconditionError unless c_w > 0, rho >= 1, c_h > 0,
  /// 0 < eps <= 1/4, h_bar >= 1 and c_h <= h_bar.
  static TruncationConfig power_law(PowerLaw omega, PowerLaw h, double h_bar);

  /// General monotone pair. Monotonicity and the h_bar bound are checked on a
  /// logarithmic sample grid at construction.
  static TruncationConfig monotone(ScalarFn omega, ScalarFn h, double h_bar);

  double omega(double u) const;
  /// Inverse of omega on [omega(0), inf).
  double omega_inverse(double v) const;
  double h(double delta) const;
  /// Truncation radius omega^{-1}(h(delta)).
  double radius(double delta) const;

  double h_bar() const noexcept { return h_bar_; }
  bool is_power_law() const noexcept { return power_law_; }
  /// Only meaningful when is_power_law().
  const PowerLaw& omega_law() const noexcept { return omega_law_; }
  /// h(delta) = h_law().coeff * delta^{-h_law().power}. Only meaningful when is_power_law().
  const PowerLaw& h_law() const noexcept { return h_law_; }

  /// Short human-readable description, e.g. "omega=4*u^5 h=4*D^-0.1 h_bar=4".
  std::string describe() const;

 private:
  bool power_law_ = true;
  PowerLaw omega_law_{1.0, 1.0};
  PowerLaw h_law_{1.0, 0.25};
  ScalarFn omega_fn_;
  ScalarFn h_fn_;
  double h_bar_ = 1.0;
};

struct TruncationRadius {
  double delta = 1.0;
  double radius = 0.0;
};

TruncationRadius truncation_radius(const TruncationConfig& cfg, double delta);

/// Metric projection onto the closed ball of radius omega^{-1}(h(delta)), with
/// x/|x| = 0 at the origin.
Vec project(const TruncationConfig& cfg, double delta, std::span<const double> x);

/// Projection onto the ball of the given radius.
Vec project_onto_ball(double radius, std::span<const double> x);

/// Coefficients evaluated at one point. l_terms[j1 * m + j2] holds L^{j1} sigma_{j2}.
struct CoefficientBlock {
  Vec point;
  Vec drift;
  std::vector<Vec> diffusion;
  std::vector<Vec> l_terms;

  const Vec& l_term(std::size_t j1, std::size_t j2) const { return l_terms[j1 * diffusion.size() + j2]; }
};

/// mu, sigma_j and L^{j1} sigma_{j2} at `point` with finiteness checks.
CoefficientBlock coefficients_at(const SdeModel& model, std::span<const double> point);

/// As coefficients_at but without finiteness checks; used by the classical
/// schemes, which are allowed to diverge.
CoefficientBlock raw_coefficients_at(const SdeModel& model, std::span<const double> point);

/// Truncated coefficients mu(pi(x)), sigma_j(pi(x)), L^{j1} sigma_{j2}(pi(x));
/// `point` holds pi(x).
CoefficientBlock truncated_coeffs(const SdeModel& model, const TruncationConfig& cfg, double delta,
                                  std::span<const double> x);

/// Samples sup_{|x| <= u} of |mu(x)|, |sigma_j(x)| and |d sigma_j / dx^l| at
/// u in {2, 4, ..., 2^10} and returns the largest ratio (sampled sup) / omega(u).
/// A value <= 1 means no violation of the omega-bound was found.
double omega_bound_ratio(const SdeModel& model, const TruncationConfig& cfg, std::size_t points_per_radius = 256);

struct ConditionThreshold {
  /// Largest delta* in (0, 1] such that the restrictive step condition holds for
  /// every delta <= delta*; 0 when no such delta* exists.
  double delta = 0.0;
  /// log(delta); -inf when delta == 0.
  double log_delta = 0.0;
};

/// Solves  h(D) >= omega((D^q h(D)^{2q})^{-1/(p-q)})  for the largest threshold.
/// Power laws are solved in closed form in log space; monotone configs by a log
/// grid scan plus bisection. Throws PreconditionError unless q >= 1 and p > q.
ConditionThreshold old_condition_threshold(const TruncationConfig& cfg, double q, double p);

/// max(D^{2q} h(D)^{4q}, omega^{-1}(h(D))^{-(2p - 2qr - 2q)}), the shape of the
/// strong-error bound without its constant. Throws PreconditionError unless
/// p > (1 + r) q.
double new_error_bound(const TruncationConfig& cfg, double q, double p, double r, double delta);

/// Natural log of new_error_bound, safe for extreme delta.
double log_new_error_bound(const TruncationConfig& cfg, double q, double p, double r, double delta);

/// Delta-exponents of the two terms of new_error_bound under the power-law
/// family, in exact rational arithmetic:
///   discretization = 2q(1 - 2 eps),  truncation = eps (2p - 2qr - 2q) / rho.
/// dominant is the smaller of the two (the term that wins as delta -> 0).
struct ErrorBoundExponents {
  Rational discretization;
  Rational truncation;
  Rational dominant;
};

ErrorBoundExponents error_bound_exponents(const TruncationConfig& cfg, double q, double p, double r);

}  // namespace tmil
