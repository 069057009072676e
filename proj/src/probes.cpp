#include <algorithm>
#include <cmath>
#include <limits>

#include "tmilstein/errors.hpp"
#include "tmilstein/experiments.hpp"
#include "tmilstein/halton.hpp"
#include "tmilstein/parallel.hpp"
#include "tmilstein/stats.hpp"

namespace tmil {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

// <x, mu(z)> + (2 p_bar - 1) |sigma(z)|^2
double khasminskii_lhs(const SdeModel& model, std::span<const double> x, std::span<const double> z, double p_bar) {
  double sigma_sq = 0.0;
  for (std::size_t j = 0; j < model.drivers; ++j) {
    const Vec col = eval_diffusion(model, z, j);
    sigma_sq += dot(col, col);
  }
  return dot(x, eval_drift(model, z)) + (2.0 * p_bar - 1.0) * sigma_sq;
}

}  // namespace

Vec interpolant_gap(const SdeModel& model, const TruncationConfig& cfg, double delta, std::span<const double> y,
                    std::span<const double> half_dB) {
  if (half_dB.size() != model.drivers) throw PreconditionError("interpolant_gap: one increment per driver required");
  const CoefficientBlock coeffs = truncated_coeffs(model, cfg, delta, y);
  const Vec origin(model.dim, 0.0);
  return apply_increment(coeffs, true, 0.5 * delta, origin, half_dB);
}

GapProbe interpolant_gap_probe(const SdeModel& model, const TruncationConfig& cfg, const GapProbeSpec& spec) {
  if (spec.deltas.size() < 3) throw PreconditionError("interpolant_gap_probe: at least 3 step sizes required");
  if (spec.n_paths == 0) throw PreconditionError("interpolant_gap_probe: n_paths must be positive");

  GapProbe probe;
  std::vector<double> steps, gaps, corrected;
  for (double delta : spec.deltas) {
    if (!(delta > 0.0 && delta <= 1.0)) throw PreconditionError("interpolant_gap_probe: steps must lie in (0, 1]");
    const std::size_t n = integer_ratio(spec.t_final, delta, "t_final / delta");
    std::vector<double> per_path(spec.n_paths);
    parallel_for(spec.n_paths, spec.workers, [&](std::size_t path) {
      const BrownianGrid fine = BrownianGrid::generate(spec.master_seed, path, model.drivers, spec.t_final, 2 * n);
      const BrownianGrid knots = fine.coarsen(2);
      double acc = 0.0;
      integrate_path(SchemeId::truncated_milstein, model, cfg, knots, model.initial_value,
                     [&](std::size_t k, std::span<const double> y) {
                       if (k >= n) return;
                       const Vec gap = interpolant_gap(model, cfg, delta, y, fine.increment(2 * k));
                       acc += dot(gap, gap);
                     });
      per_path[path] = acc / static_cast<double>(n);
    });
    const MeanEstimate est = mean_and_se(per_path);
    GapPoint pt{delta, est.mean, est.se, cfg.h(delta)};
    probe.points.push_back(pt);
    steps.push_back(delta);
    gaps.push_back(pt.mean_sq_gap);
    corrected.push_back(pt.mean_sq_gap / (pt.h_value * pt.h_value));
  }
  const LogLogFit raw = fit_log_log(steps, gaps);
  probe.exponent = raw.slope;
  probe.exponent_se = raw.slope_se;
  probe.h_corrected_exponent = fit_log_log(steps, corrected).slope;
  return probe;
}

std::vector<MomentPoint> moment_probe(const SdeModel& model, const TruncationConfig& cfg, SchemeId scheme,
                                      std::span<const double> deltas, std::size_t n_paths, double t_final,
                                      double power, std::uint64_t master_seed, std::size_t workers) {
  if (n_paths == 0) throw PreconditionError("moment_probe: n_paths must be positive");
  std::vector<MomentPoint> out;
  for (double delta : deltas) {
    const std::size_t n = integer_ratio(t_final, delta, "t_final / delta");
    std::vector<double> values(n_paths);
    parallel_for(n_paths, workers, [&](std::size_t path) {
      const BrownianGrid grid = BrownianGrid::generate(master_seed, path, model.drivers, t_final, n);
      const PathOutcome outcome = integrate_path(scheme, model, cfg, grid, model.initial_value);
      values[path] =
          outcome.blew_up ? std::numeric_limits<double>::infinity() : std::pow(norm(outcome.terminal), power);
    });
    const MeanEstimate est = mean_and_se(values);
    out.push_back({delta, est.mean, est.se});
  }
  return out;
}

PreservationResult preservation_probe(const SdeModel& model, const TruncationConfig& cfg, double delta, double p_bar,
                                      std::size_t n_points, double fit_radius, double check_radius) {
  if (n_points == 0) throw PreconditionError("preservation_probe: n_points must be positive");
  PreservationResult out;
  out.points = n_points;
  double lambda2 = 0.0;
  for (const auto& x : halton_ball_points(model.dim, n_points, fit_radius)) {
    const double xx = dot(x, x);
    lambda2 = std::max(lambda2, khasminskii_lhs(model, x, x, p_bar) / (1.0 + xx));
  }
  out.lambda2 = lambda2;

  // Radii log-uniform in [1e-3, check_radius], directions from the remaining coordinates.
  const double radius = cfg.radius(delta);
  const double log_lo = std::log(1e-3);
  const double log_hi = std::log(check_radius);
  HaltonSequence seq(model.dim + 1);
  out.worst_margin = -std::numeric_limits<double>::infinity();
  std::size_t accepted = 0;
  while (accepted < n_points) {
    const auto u = seq.next();
    Vec dir(model.dim);
    for (std::size_t i = 0; i < model.dim; ++i) dir[i] = 2.0 * u[i + 1] - 1.0;
    const double dn = norm(dir);
    if (dn < 1e-3 || dn > 1.0) continue;
    const double r = std::exp(log_lo + (log_hi - log_lo) * u[0]);
    Vec x(model.dim);
    for (std::size_t i = 0; i < model.dim; ++i) x[i] = r * dir[i] / dn;
    const Vec z = project_onto_ball(radius, x);
    const double margin = khasminskii_lhs(model, x, z, p_bar) - 2.0 * lambda2 * (1.0 + dot(x, x));
    out.worst_margin = std::max(out.worst_margin, margin);
    ++accepted;
  }
  return out;
}

}  // namespace tmil
