#include "tmilstein/scheme.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

#include "tmilstein/errors.hpp"

namespace tmil {
namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

void check_step_args(const SdeModel& model, double delta, std::span<const double> y, std::span<const double> dB) {
  if (!(delta > 0.0 && delta <= 1.0)) throw PreconditionError("step size must lie in (0, 1]");
  if (y.size() != model.dim) throw PreconditionError("state dimension does not match the model");
  if (dB.size() != model.drivers) throw PreconditionError("increment must have one entry per driver");
}

// Step with a precomputed truncation radius (ignored by classical schemes).
Vec step_with_radius(SchemeId scheme, const SdeModel& model, double radius, double delta, std::span<const double> y,
                     std::span<const double> dB) {
  if (is_truncated(scheme)) {
    const Vec projected = project_onto_ball(radius, y);
    return apply_increment(coefficients_at(model, projected), uses_milstein_correction(scheme), delta, y, dB);
  }
  return apply_increment(raw_coefficients_at(model, y), uses_milstein_correction(scheme), delta, y, dB);
}

double radius_for(SchemeId scheme, const TruncationConfig& cfg, double delta) {
  return is_truncated(scheme) ? cfg.radius(delta) : 0.0;
}

}  // namespace

std::string_view to_string(SchemeId id) {
  switch (id) {
    case SchemeId::truncated_milstein: return "truncated_milstein";
    case SchemeId::truncated_em: return "truncated_em";
    case SchemeId::classical_milstein: return "classical_milstein";
    case SchemeId::classical_em: return "classical_em";
  }
  return "?";
}

std::optional<SchemeId> parse_scheme_id(std::string_view name) {
  for (auto id : {SchemeId::truncated_milstein, SchemeId::truncated_em, SchemeId::classical_milstein,
                  SchemeId::classical_em})
    if (to_string(id) == name) return id;
  return std::nullopt;
}

bool is_truncated(SchemeId id) { return id == SchemeId::truncated_milstein || id == SchemeId::truncated_em; }

bool uses_milstein_correction(SchemeId id) {
  return id == SchemeId::truncated_milstein || id == SchemeId::classical_milstein;
}

Vec apply_increment(const CoefficientBlock& coeffs, bool milstein_correction, double delta, std::span<const double> y,
                    std::span<const double> dB) {
  const std::size_t d = y.size();
  const std::size_t m = dB.size();
  Vec next(y.begin(), y.end());
  for (std::size_t i = 0; i < d; ++i) next[i] += coeffs.drift[i] * delta;
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < d; ++i) next[i] += coeffs.diffusion[j][i] * dB[j];
  if (milstein_correction) {
    for (std::size_t j1 = 0; j1 < m; ++j1)
      for (std::size_t j2 = 0; j2 < m; ++j2) {
        const double weight = 0.5 * (dB[j1] * dB[j2] - (j1 == j2 ? delta : 0.0));
        const Vec& l = coeffs.l_term(j1, j2);
        for (std::size_t i = 0; i < d; ++i) next[i] += l[i] * weight;
      }
  }
  return next;
}

Vec step_truncated_milstein(const SdeModel& model, const TruncationConfig& cfg, double delta,
                            std::span<const double> y, std::span<const double> dB) {
  return step(SchemeId::truncated_milstein, model, cfg, delta, y, dB);
}

Vec step(SchemeId scheme, const SdeModel& model, const TruncationConfig& cfg, double delta, std::span<const double> y,
         std::span<const double> dB) {
  check_step_args(model, delta, y, dB);
  return step_with_radius(scheme, model, radius_for(scheme, cfg, delta), delta, y, dB);
}

PathOutcome integrate_path(SchemeId scheme, const SdeModel& model, const TruncationConfig& cfg,
                           const BrownianGrid& grid, std::span<const double> x0, const StateObserver& observer) {
  const double delta = grid.dt();
  if (!(delta > 0.0 && delta <= 1.0)) throw PreconditionError("step size must lie in (0, 1]");
  if (grid.drivers() != model.drivers) throw PreconditionError("grid driver count does not match the model");
  if (x0.size() != model.dim) throw PreconditionError("initial value dimension does not match the model");
  const double radius = radius_for(scheme, cfg, delta);

  PathOutcome out;
  out.terminal.assign(x0.begin(), x0.end());
  if (observer) observer(0, out.terminal);
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    Vec next = step_with_radius(scheme, model, radius, delta, out.terminal, grid.increment(k));
    if (!all_finite(next)) {
      out.blew_up = true;
      out.steps_completed = k;
      return out;
    }
    out.terminal = std::move(next);
    if (observer) observer(k + 1, out.terminal);
  }
  out.steps_completed = grid.steps();
  return out;
}

Trajectory simulate(SchemeId scheme, const SdeModel& model, const TruncationConfig& cfg, const BrownianGrid& grid,
                    std::size_t coarsen_factor) {
  const BrownianGrid coarse = grid.coarsen(coarsen_factor);
  const std::size_t n = coarse.steps();
  Trajectory traj;
  traj.scheme = scheme;
  traj.delta = coarse.dt();
  traj.times.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) traj.times[k] = static_cast<double>(k) * traj.delta;
  traj.states.resize(n + 1);

  const auto outcome = integrate_path(scheme, model, cfg, coarse, model.initial_value,
                                      [&](std::size_t k, std::span<const double> y) {
                                        traj.states[k] = Vec(y.begin(), y.end());
                                      });
  traj.blew_up = outcome.blew_up;
  traj.blowup_index = outcome.blew_up ? outcome.steps_completed + 1 : n + 1;
  return traj;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const SdeModel& model,
                          const TruncationConfig& cfg, std::uint64_t seed) {
  const auto num = [](double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
  };
  out << "# scheme: " << to_string(traj.scheme) << "\n"
      << "# delta: " << num(traj.delta) << "\n"
      << "# seed: " << seed << "\n"
      << "# model: " << model.name << "\n"
      << "# truncation: " << cfg.describe() << "\n"
      << "# blew_up: " << (traj.blew_up ? "true" : "false") << "\n"
      << "k,t";
  for (std::size_t i = 1; i <= model.dim; ++i) out << ",x" << i;
  out << "\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    out << k << ',' << num(traj.times[k]);
    for (std::size_t i = 0; i < model.dim; ++i) {
      out << ',';
      if (traj.states[k]) out << num((*traj.states[k])[i]);
    }
    out << "\n";
  }
}

}  // namespace tmil
