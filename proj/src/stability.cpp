#include <algorithm>
#include <cmath>
#include <sstream>

#include "tmilstein/errors.hpp"
#include "tmilstein/experiments.hpp"
#include "tmilstein/halton.hpp"
#include "tmilstein/parallel.hpp"

namespace tmil {
namespace {

constexpr std::size_t kRadialGrid = 100'000;
constexpr double kInnerRadius = 1e-6;
constexpr double kRatioCap = 1e12;
constexpr double kPublishedH = 25.0;
constexpr double kPublishedDelta1 = 0.04;

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Maximizes f on [a, b] to a bracket width of tol.
template <typename F>
std::pair<double, double> golden_section_max(F&& f, double a, double b, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x)};
}

}  // namespace

StabilityConstants compute_stability_constants(const SdeModel& model, const TruncationConfig& cfg, const KFunction& k) {
  if (!(k.coeff > 0.0)) throw PreconditionError("stability constants need k(u) > 0 for u > 0");
  StabilityConstants out;
  out.radius = cfg.radius(1.0);
  const double outer = out.radius;
  const double inner = std::min(kInnerRadius, 0.5 * outer);
  const auto dirs = halton_sphere_directions(model.dim, 1024);

  auto ratio = [&](const Vec& dir, double u) {
    Vec x = dir;
    for (double& v : x) v *= u;
    const Vec mu = eval_drift(model, x);
    double s = 0.0;
    for (double m : mu) s += m * m;
    return s / k(u);
  };

  out.ratio_near_zero = 0.0;
  for (const auto& dir : dirs) out.ratio_near_zero = std::max(out.ratio_near_zero, ratio(dir, inner));
  if (!(out.ratio_near_zero <= kRatioCap)) {
    std::ostringstream msg;
    msg << "|mu(x)|^2 / k(|x|) = " << out.ratio_near_zero << " at |x| = " << inner
        << " exceeds 1e12; the ratio is not bounded near the origin";
    throw ExperimentError(msg.str());
  }

  const double log_lo = std::log(inner);
  const double log_hi = std::log(outer);
  auto grid_radius = [&](std::size_t i) {
    if (i + 1 == kRadialGrid) return outer;
    return std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(i) / static_cast<double>(kRadialGrid - 1));
  };

  double best = -1.0;
  double best_u = inner;
  for (const auto& dir : dirs) {
    std::size_t arg = 0;
    double dir_best = -1.0;
    for (std::size_t i = 0; i < kRadialGrid; ++i) {
      const double v = ratio(dir, grid_radius(i));
      if (v > dir_best) {
        dir_best = v;
        arg = i;
      }
    }
    double dir_u = grid_radius(arg);
    const double a = grid_radius(arg == 0 ? 0 : arg - 1);
    const double b = grid_radius(std::min(arg + 1, kRadialGrid - 1));
    if (b > a) {
      const auto [u, v] = golden_section_max([&](double u) { return ratio(dir, u); }, a, b, 1e-10);
      if (v > dir_best) {
        dir_best = v;
        dir_u = u;
      }
    }
    if (dir_best > best) {
      best = dir_best;
      best_u = dir_u;
    }
  }
  out.H = best;
  out.H_argmax = best_u;

  const double k_outer = k(outer);
  out.delta_1 = std::min(1.0, 0.25 * k_outer * k_outer);
  if (out.H > 0.0) out.delta_1 = std::min(out.delta_1, 0.5 / out.H);

  if (model.name == "stable_quintic") {
    out.published_H = kPublishedH;
    out.published_delta_1 = kPublishedDelta1;
    out.differs_from_published = std::abs(out.H - kPublishedH) > 1e-9 * kPublishedH ||
                                 std::abs(out.delta_1 - kPublishedDelta1) > 1e-9 * kPublishedDelta1;
  }
  return out;
}

StabilityDecay run_stability_ensemble(const SdeModel& model, const TruncationConfig& cfg,
                                      const StabilityEnsembleSpec& spec) {
  if (!(spec.delta > 0.0 && spec.delta <= 1.0)) throw PreconditionError("stability ensemble: delta must lie in (0, 1]");
  if (spec.n_paths == 0 || spec.horizon_steps == 0)
    throw PreconditionError("stability ensemble: n_paths and horizon_steps must be positive");
  if (!(spec.tol_stab > 0.0)) throw PreconditionError("stability ensemble: tol_stab must be positive");
  if (!(spec.tail_fraction > 0.0 && spec.tail_fraction <= 1.0))
    throw PreconditionError("stability ensemble: tail_fraction must lie in (0, 1]");

  const std::size_t n = spec.horizon_steps;
  const auto tail_len =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(spec.tail_fraction * static_cast<double>(n))));
  const std::size_t tail_start = n + 1 - tail_len;
  const double t_final = spec.delta * static_cast<double>(n);
  const std::size_t recorded = std::min(spec.record_paths, spec.n_paths);

  StabilityDecay out;
  out.delta = spec.delta;
  out.horizon_steps = n;
  out.tol_stab = spec.tol_stab;
  out.decayed.assign(spec.n_paths, 0);
  out.recorded_norms.resize(recorded);
  std::vector<char> blew(spec.n_paths, 0);

  parallel_for(spec.n_paths, spec.workers, [&](std::size_t path) {
    const BrownianGrid grid = BrownianGrid::generate(spec.master_seed, path, model.drivers, t_final, n);
    bool small_tail = true;
    std::vector<double>* norms = path < recorded ? &out.recorded_norms[path] : nullptr;
    if (norms) norms->reserve(n + 1);
    const PathOutcome outcome =
        integrate_path(spec.scheme, model, cfg, grid, model.initial_value, [&](std::size_t k, std::span<const double> y) {
          const double r = norm(y);
          if (k >= tail_start && !(r < spec.tol_stab)) small_tail = false;
          if (norms) norms->push_back(r);
        });
    blew[path] = outcome.blew_up;
    out.decayed[path] = !outcome.blew_up && small_tail;
  });

  std::size_t decayed = 0;
  for (std::size_t i = 0; i < spec.n_paths; ++i) {
    decayed += out.decayed[i] ? 1 : 0;
    out.blowups += blew[i] ? 1 : 0;
  }
  out.decay_fraction = static_cast<double>(decayed) / static_cast<double>(spec.n_paths);
  if (spec.delta_1 && spec.delta > *spec.delta_1) {
    std::ostringstream msg;
    msg << "step " << spec.delta << " exceeds the computed stability bound delta_1 = " << *spec.delta_1;
    out.warning = msg.str();
  }
  return out;
}

}  // namespace tmil
