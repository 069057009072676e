#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tmilstein/errors.hpp"
#include "tmilstein/experiments.hpp"
#include "tmilstein/parallel.hpp"
#include "tmilstein/stats.hpp"

namespace tmil {
namespace {

struct PathErrors {
  std::vector<double> moment;
  std::vector<char> blew_up;
};

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

PathErrors run_path(const RateExperimentSpec& spec, SchemeId reference_scheme, std::size_t n_fine,
                    const std::vector<std::size_t>& factors, std::uint64_t path) {
  const SdeModel& model = spec.model;
  const BrownianGrid grid = BrownianGrid::generate(spec.master_seed, path, model.drivers, spec.t_final, n_fine);
  const bool sup = spec.error_norm == ErrorNorm::sup;

  std::vector<Vec> reference_states;
  if (sup) reference_states.resize(n_fine + 1);
  const PathOutcome reference =
      integrate_path(reference_scheme, model, spec.truncation, grid, model.initial_value,
                     sup ? StateObserver([&](std::size_t k, std::span<const double> y) {
                       reference_states[k].assign(y.begin(), y.end());
                     })
                         : StateObserver{});
  if (reference.blew_up) {
    throw ExperimentError("reference solution blew up on path " + std::to_string(path) + " at step " +
                          std::to_string(reference.steps_completed));
  }

  PathErrors out;
  out.moment.resize(factors.size());
  out.blew_up.resize(factors.size());
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const std::size_t factor = factors[i];
    const BrownianGrid coarse = grid.coarsen(factor);
    if (coarse.master_seed() != grid.master_seed() || coarse.path_index() != grid.path_index() ||
        coarse.aggregation() != factor) {
      throw ExperimentError("coarse grid is not derived from the reference grid");
    }
    double worst = 0.0;
    const PathOutcome outcome = integrate_path(
        spec.scheme, model, spec.truncation, coarse, model.initial_value,
        sup ? StateObserver([&](std::size_t k, std::span<const double> y) {
          worst = std::max(worst, distance(y, reference_states[k * factor]));
        })
            : StateObserver{});
    out.blew_up[i] = outcome.blew_up;
    const double diff = sup ? worst : distance(outcome.terminal, reference.terminal);
    out.moment[i] = outcome.blew_up ? std::numeric_limits<double>::quiet_NaN() : std::pow(diff, 2.0 * spec.q);
  }
  return out;
}

std::vector<RatePoint> summarize(const RateExperimentSpec& spec, const std::vector<std::size_t>& factors,
                                 const std::vector<PathErrors>& paths) {
  std::vector<RatePoint> points(factors.size());
  std::vector<double> values;
  values.reserve(paths.size());
  for (std::size_t i = 0; i < factors.size(); ++i) {
    values.clear();
    RatePoint& pt = points[i];
    pt.coarsen_factor = factors[i];
    pt.delta = spec.delta_ref * static_cast<double>(factors[i]);
    for (const auto& p : paths) {
      if (p.blew_up[i])
        ++pt.blowups;
      else
        values.push_back(p.moment[i]);
    }
    pt.paths_used = values.size();
    if (values.empty()) {
      pt.error_moment = pt.error_moment_se = pt.error_norm = pt.error_norm_se = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const MeanEstimate est = mean_and_se(values);
    pt.error_moment = est.mean;
    pt.error_moment_se = est.se;
    const double two_q = 2.0 * spec.q;
    pt.error_norm = std::pow(est.mean, 1.0 / two_q);
    pt.error_norm_se = est.mean > 0.0 ? pt.error_norm * est.se / (two_q * est.mean) : 0.0;
  }
  return points;
}

}  // namespace

LogLogFit fit_log_log(std::span<const double> steps, std::span<const double> errors) {
  if (steps.size() != errors.size()) throw PreconditionError("fit_log_log: size mismatch");
  if (steps.size() < 3) throw PreconditionError("fit_log_log: at least 3 points required");
  std::vector<double> x(steps.size()), y(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!(steps[i] > 0.0) || !(errors[i] > 0.0) || !std::isfinite(errors[i]))
      throw PreconditionError("fit_log_log: steps and errors must be positive and finite");
    x[i] = std::log2(steps[i]);
    y[i] = std::log2(errors[i]);
  }
  const LinearFit lf = least_squares(x, y);
  return {lf.slope, lf.slope_se, lf.intercept, steps.size()};
}

RateFit fit_rate(std::vector<RatePoint> points, double q) {
  std::vector<double> steps, errors;
  for (const auto& p : points) {
    if (p.error_norm > 0.0 && std::isfinite(p.error_norm)) {
      steps.push_back(p.delta);
      errors.push_back(p.error_norm);
    }
  }
  if (steps.size() < 3) throw ExperimentError("fewer than 3 step sizes produced a usable error estimate");
  const LogLogFit fit = fit_log_log(steps, errors);
  RateFit out;
  out.points = std::move(points);
  out.q = q;
  out.slope = fit.slope;
  out.slope_se = fit.slope_se;
  out.intercept = fit.intercept;
  out.moment_slope = 2.0 * q * fit.slope;
  out.moment_slope_se = 2.0 * q * fit.slope_se;
  return out;
}

RateFit run_rate_experiment(const RateExperimentSpec& spec) {
  if (!(spec.q > 0.0)) throw PreconditionError("rate experiment: q must be positive");
  if (!(spec.t_final > 0.0) || !(spec.delta_ref > 0.0))
    throw PreconditionError("rate experiment: t_final and delta_ref must be positive");
  if (spec.test_steps.size() < 3) throw PreconditionError("rate experiment: at least 3 test steps required");
  if (spec.n_paths < 2) throw PreconditionError("rate experiment: at least 2 paths required");
  if (spec.delta_ref > 1.0) throw PreconditionError("rate experiment: delta_ref must be <= 1");

  const std::size_t n_fine = integer_ratio(spec.t_final, spec.delta_ref, "t_final / delta_ref");
  std::vector<std::size_t> factors;
  for (double step : spec.test_steps) {
    if (!(step > 0.0 && step <= 1.0)) throw PreconditionError("rate experiment: test steps must lie in (0, 1]");
    const std::size_t f = integer_ratio(step, spec.delta_ref, "test step / delta_ref");
    if (n_fine % f != 0) throw PreconditionError("rate experiment: test step does not divide t_final");
    factors.push_back(f);
  }
  const SchemeId reference_scheme = spec.reference_scheme.value_or(spec.scheme);

  std::vector<PathErrors> paths;
  std::size_t done = 0;
  std::size_t target = spec.n_paths;
  std::vector<RatePoint> points;
  for (;;) {
    paths.resize(target);
    parallel_for(target - done, spec.workers, [&](std::size_t i) {
      paths[done + i] = run_path(spec, reference_scheme, n_fine, factors, done + i);
    });
    done = target;
    points = summarize(spec, factors, paths);
    if (spec.max_paths <= target) break;
    const bool precise = std::all_of(points.begin(), points.end(), [&](const RatePoint& p) {
      return p.error_moment_se < spec.target_relative_se * p.error_moment;
    });
    if (precise) break;
    target = std::min(2 * target, spec.max_paths);
  }

  RateFit fit = fit_rate(std::move(points), spec.q);
  fit.n_paths = done;
  return fit;
}

bool errors_monotone(const RateFit& fit, double n_se) {
  std::vector<RatePoint> pts = fit.points;
  std::sort(pts.begin(), pts.end(), [](const RatePoint& a, const RatePoint& b) { return a.delta > b.delta; });
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const auto& coarse = pts[i - 1];
    const auto& fine = pts[i];
    const double slack = n_se * std::hypot(coarse.error_moment_se, fine.error_moment_se);
    if (fine.error_moment > coarse.error_moment + slack) return false;
  }
  return true;
}

StepConditionComparison compare_step_conditions(const TruncationConfig& cfg, double q, double p, double r) {
  if (!(p > (1.0 + r) * q)) throw PreconditionError("compare_step_conditions requires p > (1 + r) q");
  StepConditionComparison out;
  out.old_threshold = old_condition_threshold(cfg, q, p);
  out.new_threshold = 1.0;
  out.exponents = error_bound_exponents(cfg, q, p, r);
  out.dominant_rate = out.exponents.dominant.to_double();
  return out;
}

}  // namespace tmil
