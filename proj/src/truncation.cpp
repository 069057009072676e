#include "tmilstein/truncation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "tmilstein/errors.hpp"
#include "tmilstein/halton.hpp"

namespace tmil {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void require_delta(double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw PreconditionError("step size must lie in (0, 1]");
}

CoefficientBlock evaluate_block(const SdeModel& model, std::span<const double> point, bool checked) {
  CoefficientBlock block;
  block.point.assign(point.begin(), point.end());
  block.drift = checked ? eval_drift(model, point) : model.drift(point);
  block.diffusion.reserve(model.drivers);
  for (std::size_t j = 0; j < model.drivers; ++j)
    block.diffusion.push_back(checked ? eval_diffusion(model, point, j) : model.diffusion_col(point, j));
  block.l_terms.reserve(model.drivers * model.drivers);
  for (std::size_t j1 = 0; j1 < model.drivers; ++j1)
    for (std::size_t j2 = 0; j2 < model.drivers; ++j2) {
      if (checked || !model.l_op)
        block.l_terms.push_back(eval_l_op(model, point, j1, j2));
      else
        block.l_terms.push_back(model.l_op(point, j1, j2));
    }
  return block;
}

// log of the right-hand side omega((D^q h^{2q})^{-1/(p-q)}) of the restrictive condition.
double log_condition_rhs(const TruncationConfig& cfg, double q, double p, double log_delta) {
  const double log_h = std::log(cfg.h(std::exp(log_delta)));
  const double log_arg = -(q * log_delta + 2.0 * q * log_h) / (p - q);
  const double w = cfg.omega(std::exp(log_arg));
  return std::log(w);
}

double log_radius(const TruncationConfig& cfg, double delta) {
  if (cfg.is_power_law()) {
    const auto& w = cfg.omega_law();
    return (std::log(cfg.h(delta)) - std::log(w.coeff)) / w.power;
  }
  return std::log(cfg.radius(delta));
}

}  // namespace

TruncationConfig TruncationConfig::power_law(PowerLaw omega, PowerLaw h, double h_bar) {
  if (!(omega.coeff > 0.0) || !(omega.power >= 1.0))
    throw PreconditionError("truncation: omega requires coeff > 0 and power >= 1");
  if (!(h.coeff > 0.0) || !(h.power > 0.0) || !(h.power <= 0.25))
    throw PreconditionError("truncation: h requires coeff > 0 and 0 < power <= 1/4");
  if (!(h_bar >= 1.0)) throw PreconditionError("truncation: h_bar must be >= 1");
  if (h.coeff > h_bar) throw PreconditionError("truncation: delta^{1/4} h(delta) <= h_bar fails at delta = 1");
  TruncationConfig cfg;
  cfg.power_law_ = true;
  cfg.omega_law_ = omega;
  cfg.h_law_ = h;
  cfg.h_bar_ = h_bar;
  return cfg;
}

TruncationConfig TruncationConfig::monotone(ScalarFn omega, ScalarFn h, double h_bar) {
  if (!omega || !h) throw PreconditionError("truncation: omega and h must be callable");
  if (!(h_bar >= 1.0)) throw PreconditionError("truncation: h_bar must be >= 1");
  double prev = omega(0.0);
  for (int k = -60; k <= 60; ++k) {
    const double w = omega(std::pow(10.0, k / 10.0));
    if (!(w > prev)) throw PreconditionError("truncation: omega is not strictly increasing");
    prev = w;
  }
  double prev_h = -std::numeric_limits<double>::infinity();
  for (int k = 200; k >= 0; --k) {
    const double delta = std::pow(10.0, -k / 10.0);
    const double hv = h(delta);
    if (k < 200 && !(hv < prev_h)) throw PreconditionError("truncation: h is not strictly decreasing");
    if (std::pow(delta, 0.25) * hv > h_bar * (1.0 + 1e-12))
      throw PreconditionError("truncation: delta^{1/4} h(delta) exceeds h_bar");
    prev_h = hv;
  }
  TruncationConfig cfg;
  cfg.power_law_ = false;
  cfg.omega_fn_ = std::move(omega);
  cfg.h_fn_ = std::move(h);
  cfg.h_bar_ = h_bar;
  return cfg;
}

double TruncationConfig::omega(double u) const {
  return power_law_ ? omega_law_.coeff * std::pow(u, omega_law_.power) : omega_fn_(u);
}

double TruncationConfig::omega_inverse(double v) const {
  if (power_law_) return std::pow(v / omega_law_.coeff, 1.0 / omega_law_.power);
  if (v <= omega_fn_(0.0)) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  while (omega_fn_(hi) < v) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw PreconditionError("truncation: omega^{-1} out of range");
  }
  while (hi - lo > 1e-12 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (omega_fn_(mid) < v)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double TruncationConfig::h(double delta) const {
  return power_law_ ? h_law_.coeff * std::pow(delta, -h_law_.power) : h_fn_(delta);
}

double TruncationConfig::radius(double delta) const { return omega_inverse(h(delta)); }

std::string TruncationConfig::describe() const {
  auto num = [](double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
  };
  if (!power_law_) return "omega=<monotone> h=<monotone> h_bar=" + num(h_bar_);
  return "omega=" + num(omega_law_.coeff) + "*u^" + num(omega_law_.power) + " h=" + num(h_law_.coeff) + "*D^-" +
         num(h_law_.power) + " h_bar=" + num(h_bar_);
}

TruncationRadius truncation_radius(const TruncationConfig& cfg, double delta) {
  require_delta(delta);
  return {delta, cfg.radius(delta)};
}

Vec project_onto_ball(double radius, std::span<const double> x) {
  const double n = norm(x);
  Vec out(x.begin(), x.end());
  if (n <= radius) return out;
  // Rounding can leave the scaled point a few ulps outside; shrink until it lies in the ball.
  double scale = radius / n;
  for (;;) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * scale;
    if (norm(out) <= radius) return out;
    scale = std::nextafter(scale, 0.0);
  }
}

Vec project(const TruncationConfig& cfg, double delta, std::span<const double> x) {
  require_delta(delta);
  return project_onto_ball(cfg.radius(delta), x);
}

CoefficientBlock coefficients_at(const SdeModel& model, std::span<const double> point) {
  return evaluate_block(model, point, true);
}

CoefficientBlock raw_coefficients_at(const SdeModel& model, std::span<const double> point) {
  return evaluate_block(model, point, false);
}

CoefficientBlock truncated_coeffs(const SdeModel& model, const TruncationConfig& cfg, double delta,
                                  std::span<const double> x) {
  const Vec projected = project(cfg, delta, x);
  return coefficients_at(model, projected);
}

double omega_bound_ratio(const SdeModel& model, const TruncationConfig& cfg, std::size_t points_per_radius) {
  double worst = 0.0;
  const auto dirs = halton_sphere_directions(model.dim, model.dim == 1 ? 2 : 64);
  for (int k = 1; k <= 10; ++k) {
    const double u = std::ldexp(1.0, k);
    auto points = halton_ball_points(model.dim, points_per_radius, u);
    for (const auto& d : dirs) {
      Vec edge = d;
      for (double& v : edge) v *= u;
      points.push_back(std::move(edge));
    }
    double sup = 0.0;
    for (const auto& x : points) {
      sup = std::max(sup, norm(eval_drift(model, x)));
      for (std::size_t j = 0; j < model.drivers; ++j) {
        sup = std::max(sup, norm(eval_diffusion(model, x, j)));
        Vec probe = x;
        for (std::size_t l = 0; l < model.dim; ++l) {
          const double xl = x[l];
          const double step = std::max(1e-6, 1e-6 * std::abs(xl));
          probe[l] = xl + step;
          const Vec plus = eval_diffusion(model, probe, j);
          probe[l] = xl - step;
          const Vec minus = eval_diffusion(model, probe, j);
          probe[l] = xl;
          double g = 0.0;
          for (std::size_t i = 0; i < model.dim; ++i) {
            const double c = (plus[i] - minus[i]) / (2.0 * step);
            g += c * c;
          }
          sup = std::max(sup, std::sqrt(g));
        }
      }
    }
    worst = std::max(worst, sup / cfg.omega(u));
  }
  return worst;
}

ConditionThreshold old_condition_threshold(const TruncationConfig& cfg, double q, double p) {
  if (!(q >= 1.0) || !(p > q)) throw PreconditionError("old_condition_threshold requires q >= 1 and p > q");

  if (cfg.is_power_law()) {
    // With L = log D <= 0 the condition reduces to  A + b L >= 0.
    const auto& w = cfg.omega_law();
    const auto& hl = cfg.h_law();
    const double eps = hl.power;
    const double rho = w.power;
    const double a = std::log(hl.coeff) * (1.0 + 2.0 * q * rho / (p - q)) - std::log(w.coeff);
    const double b = -eps + rho * q * (1.0 - 2.0 * eps) / (p - q);
    constexpr double kFlat = 1e-15;
    double log_threshold;
    if (b < -kFlat) {
      log_threshold = std::min(0.0, a / -b);
    } else if (b > kFlat) {
      log_threshold = kNegInf;  // fails as D -> 0
    } else {
      log_threshold = a >= 0.0 ? 0.0 : kNegInf;
    }
    return {std::exp(log_threshold), log_threshold};
  }

  auto holds = [&](double log_delta) {
    return std::log(cfg.h(std::exp(log_delta))) >= log_condition_rhs(cfg, q, p, log_delta);
  };
  constexpr int kGrid = 4000;
  const double log_min = std::log(1e-300);
  auto grid_at = [&](int i) { return log_min * static_cast<double>(i) / kGrid; };
  if (!holds(grid_at(kGrid))) return {0.0, kNegInf};
  int first_holding = kGrid;
  while (first_holding > 0 && holds(grid_at(first_holding - 1))) --first_holding;
  if (first_holding == 0) return {1.0, 0.0};
  double fail = grid_at(first_holding - 1);
  double ok = grid_at(first_holding);
  while (std::abs(fail - ok) > 1e-12 * std::max(1.0, std::abs(ok))) {
    const double mid = 0.5 * (fail + ok);
    if (holds(mid))
      ok = mid;
    else
      fail = mid;
  }
  return {std::exp(ok), ok};
}

double log_new_error_bound(const TruncationConfig& cfg, double q, double p, double r, double delta) {
  if (!(p > (1.0 + r) * q)) throw PreconditionError("new_error_bound requires p > (1 + r) q");
  require_delta(delta);
  const double discretization = 2.0 * q * std::log(delta) + 4.0 * q * std::log(cfg.h(delta));
  const double truncation = -(2.0 * p - 2.0 * q * r - 2.0 * q) * log_radius(cfg, delta);
  return std::max(discretization, truncation);
}

double new_error_bound(const TruncationConfig& cfg, double q, double p, double r, double delta) {
  return std::exp(log_new_error_bound(cfg, q, p, r, delta));
}

ErrorBoundExponents error_bound_exponents(const TruncationConfig& cfg, double q, double p, double r) {
  if (!(p > (1.0 + r) * q)) throw PreconditionError("error_bound_exponents requires p > (1 + r) q");
  if (!cfg.is_power_law()) throw PreconditionError("error_bound_exponents requires a power-law truncation");
  const Rational eps = Rational::from_double(cfg.h_law().power);
  const Rational rho = Rational::from_double(cfg.omega_law().power);
  const Rational qr = Rational::from_double(q);
  const Rational pr = Rational::from_double(p);
  const Rational rr = Rational::from_double(r);
  const Rational two(2);
  ErrorBoundExponents e;
  e.discretization = two * qr * (Rational(1) - two * eps);
  e.truncation = eps * (two * pr - two * qr * rr - two * qr) / rho;
  e.dominant = min(e.discretization, e.truncation);
  return e;
}

}  // namespace tmil
