#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tmilstein/model.hpp"
#include "tmilstein/scheme.hpp"
#include "tmilstein/truncation.hpp"

namespace tmil {

// ---------------------------------------------------------------------------
// Strong convergence rates
// ---------------------------------------------------------------------------

/// Which pathwise discrepancy feeds the error moment.
enum class ErrorNorm {
  terminal,  ///< |Y_ref(T) - Y(T)|^{2q}
  sup,       ///< max over shared knots of |Y_ref(t_k) - Y(t_k)|^{2q}
};

struct RateExperimentSpec {
  SdeModel model;
  TruncationConfig truncation;
  SchemeId scheme = SchemeId::truncated_milstein;
  /// Scheme used for the fine-grid reference; defaults to `scheme`.
  std::optional<SchemeId> reference_scheme;
  /// Error is measured as E|.|^{2q}.
  double q = 1.0;
  double t_final = 1.28;
  double delta_ref = 0.01 / 8.0;
  /// Every test step must be an integer multiple of delta_ref dividing t_final.
  std::vector<double> test_steps;
  std::size_t n_paths = 1000;
  /// Cap for adaptive doubling of the ensemble; values <= n_paths disable it.
  std::size_t max_paths = 0;
  /// Doubling continues while some point has SE >= target_relative_se * error.
  double target_relative_se = 0.1;
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;
  ErrorNorm error_norm = ErrorNorm::terminal;
};

struct RatePoint {
  double delta = 0.0;
  std::size_t coarsen_factor = 0;
  /// Monte-Carlo mean of the pathwise |difference|^{2q} and its standard error.
  double error_moment = 0.0;
  double error_moment_se = 0.0;
  /// L^{2q} norm (error_moment)^{1/(2q)} and its delta-method standard error.
  double error_norm = 0.0;
  double error_norm_se = 0.0;
  std::size_t paths_used = 0;
  std::size_t blowups = 0;
};

struct LogLogFit {
  double slope = 0.0;
  double slope_se = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
};

/// Unweighted least squares of log2(error) on log2(step). The standard error
/// comes from the residuals. Throws PreconditionError for fewer than 3 points,
/// mismatched sizes, or non-positive values.
LogLogFit fit_log_log(std::span<const double> steps, std::span<const double> errors);

/// Convergence summary. `slope` is the order of the L^{2q} norm error; the
/// moment slope is exactly 2q times it.
struct RateFit {
  std::vector<RatePoint> points;
  double q = 1.0;
  double slope = 0.0;
  double slope_se = 0.0;
  double intercept = 0.0;
  double moment_slope = 0.0;
  double moment_slope_se = 0.0;
  std::size_t n_paths = 0;
};

/// Builds the fit from measured points (also the test hook for synthetic errors).
RateFit fit_rate(std::vector<RatePoint> points, double q);

/// Every fine-grid path drives the reference and each test step through
/// coarsening of the same increments. Throws PreconditionError for an invalid
/// spec and ExperimentError if a reference path blows up.
RateFit run_rate_experiment(const RateExperimentSpec& spec);

/// True when the error moment does not increase as delta decreases, allowing
/// `n_se` combined standard errors of slack.
bool errors_monotone(const RateFit& fit, double n_se = 2.0);

// ---------------------------------------------------------------------------
// Step-size conditions
// ---------------------------------------------------------------------------

struct StepConditionComparison {
  ConditionThreshold old_threshold;
  /// The new error bound holds for every delta in (0, 1].
  double new_threshold = 1.0;
  /// Delta-exponent of the term that dominates the error bound as delta -> 0.
  double dominant_rate = 0.0;
  ErrorBoundExponents exponents;
};

/// Throws PreconditionError unless p > (1 + r) q and the config is a power law.
StepConditionComparison compare_step_conditions(const TruncationConfig& cfg, double q, double p, double r);

// ---------------------------------------------------------------------------
// Almost-sure stability
// ---------------------------------------------------------------------------

struct StabilityConstants {
  /// omega^{-1}(h(1)).
  double radius = 0.0;
  /// sup of |mu(x)|^2 / k(|x|) over 0 < |x| < radius, and where it is attained.
  double H = 0.0;
  double H_argmax = 0.0;
  /// min(1, 0.5 / H, 0.25 k(radius)^2).
  double delta_1 = 1.0;
  /// |mu(x)|^2 / k(|x|) at the smallest probed radius (1e-6).
  double ratio_near_zero = 0.0;
  /// Values published for the stable_quintic example, attached for that model.
  std::optional<double> published_H;
  std::optional<double> published_delta_1;
  /// True when published values are attached and disagree with the computed ones.
  bool differs_from_published = false;
};

/// Radial grid search (1e5 log-spaced radii per direction) refined by
/// golden-section search. Scalar models use directions +1 and -1; higher
/// dimensions use 1024 Halton directions on the sphere. Throws ExperimentError
/// when the ratio exceeds 1e12 near the origin and PreconditionError for
/// k.coeff <= 0.
StabilityConstants compute_stability_constants(const SdeModel& model, const TruncationConfig& cfg, const KFunction& k);

struct StabilityEnsembleSpec {
  double delta = 0.04;
  std::size_t n_paths = 1000;
  std::size_t horizon_steps = 1000;
  double tol_stab = 1e-2;
  /// A path decays when |Y_k| < tol_stab over this trailing fraction of knots.
  double tail_fraction = 0.1;
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;
  /// Number of leading paths whose |Y_k| series is kept.
  std::size_t record_paths = 0;
  /// When set and delta exceeds it, the result carries a warning.
  std::optional<double> delta_1;
  SchemeId scheme = SchemeId::truncated_milstein;
};

struct StabilityDecay {
  double delta = 0.0;
  std::size_t horizon_steps = 0;
  double tol_stab = 0.0;
  std::vector<char> decayed;
  double decay_fraction = 0.0;
  std::size_t blowups = 0;
  /// |Y_k| for k = 0..horizon_steps of the first record_paths paths.
  std::vector<std::vector<double>> recorded_norms;
  std::optional<std::string> warning;
};

StabilityDecay run_stability_ensemble(const SdeModel& model, const TruncationConfig& cfg,
                                      const StabilityEnsembleSpec& spec);

struct StabilityReport {
  StabilityConstants constants;
  std::optional<StabilityDecay> decay;
};

// ---------------------------------------------------------------------------
// Probes of moment bounds and interpolation gaps
// ---------------------------------------------------------------------------

/// Y(t_k + delta/2) - Y_k for the continuous interpolant: one Milstein-type
/// half step with coefficients frozen at pi_delta(Y_k), driven by the Brownian
/// increment over the first half of the step.
Vec interpolant_gap(const SdeModel& model, const TruncationConfig& cfg, double delta, std::span<const double> y,
                    std::span<const double> half_dB);

struct GapPoint {
  double delta = 0.0;
  /// Mean over paths and knots of |gap|^2, with its standard error over paths.
  double mean_sq_gap = 0.0;
  double se = 0.0;
  double h_value = 0.0;
};

struct GapProbe {
  std::vector<GapPoint> points;
  /// log-log slope of mean_sq_gap against delta.
  double exponent = 0.0;
  double exponent_se = 0.0;
  /// Slope after dividing mean_sq_gap by h(delta)^2.
  double h_corrected_exponent = 0.0;
};

struct GapProbeSpec {
  std::vector<double> deltas;
  std::size_t n_paths = 1000;
  double t_final = 1.0;
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;
};

GapProbe interpolant_gap_probe(const SdeModel& model, const TruncationConfig& cfg, const GapProbeSpec& spec);

struct MomentPoint {
  double delta = 0.0;
  double moment = 0.0;
  double se = 0.0;
};

/// Monte-Carlo E|Y_N|^power at T = t_final for each delta (each must divide t_final).
std::vector<MomentPoint> moment_probe(const SdeModel& model, const TruncationConfig& cfg, SchemeId scheme,
                                      std::span<const double> deltas, std::size_t n_paths, double t_final,
                                      double power, std::uint64_t master_seed, std::size_t workers = 1);

struct PreservationResult {
  /// sup over untruncated probes of (<x, mu> + (2 p_bar - 1)|sigma|^2) / (1 + |x|^2), floored at 0.
  double lambda2 = 0.0;
  /// Largest (<x, mu~> + (2 p_bar - 1)|sigma~|^2) - 2 lambda2 (1 + |x|^2) over the truncated probes.
  double worst_margin = 0.0;
  std::size_t points = 0;
};

/// Fits lambda2 on Halton points of radius fit_radius, then checks the
/// truncated coefficients at step delta on points spread log-uniformly in
/// radius up to check_radius.
PreservationResult preservation_probe(const SdeModel& model, const TruncationConfig& cfg, double delta, double p_bar,
                                      std::size_t n_points, double fit_radius, double check_radius);

}  // namespace tmil
