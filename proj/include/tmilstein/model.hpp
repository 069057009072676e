#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tmil {

using Vec = std::vector<double>;

/// Autonomous Ito SDE  dx = mu(x) dt + sum_j sigma_j(x) dB^j  on R^d with m drivers.
///
/// Driver indices are zero-based throughout the library. All coefficient
/// functions must be deterministic and free of side effects; a model is shared
/// read-only between worker threads.
struct SdeModel {
  using DriftFn = std::function<Vec(std::span<const double>)>;
  using ColumnFn = std::function<Vec(std::span<const double>, std::size_t)>;
  using LOperatorFn = std::function<Vec(std::span<const double>, std::size_t, std::size_t)>;

  std::string name;
  std::size_t dim = 1;
  std::size_t drivers = 1;
  DriftFn drift;
  /// sigma_j(x), the j-th column of the diffusion matrix.
  ColumnFn diffusion_col;
  /// L^{j1} sigma_{j2}(x) = sum_l sigma_{l,j1}(x) d sigma_{j2}(x) / dx^l. Optional;
  /// eval_l_op falls back to central differences when empty.
  LOperatorFn l_op;
  Vec initial_value;
  /// Polynomial growth exponent r of the local Lipschitz bound.
  double growth_exponent = 0.0;
};

/// mu(x), throwing EvaluationError on a non-finite or mis-sized result.
Vec eval_drift(const SdeModel& model, std::span<const double> x);

/// sigma_j(x), throwing EvaluationError on a non-finite or mis-sized result.
Vec eval_diffusion(const SdeModel& model, std::span<const double> x, std::size_t j);

/// L^{j1} sigma_{j2}(x) using the model's analytic operator when present,
/// otherwise eval_l_op_fd.
Vec eval_l_op(const SdeModel& model, std::span<const double> x, std::size_t j1, std::size_t j2);

/// L^{j1} sigma_{j2}(x) by central differences of diffusion_col with per-component
/// step max(1e-6, 1e-6 |x_l|). Ignores model.l_op.
Vec eval_l_op_fd(const SdeModel& model, std::span<const double> x, std::size_t j1, std::size_t j2);

enum class BuiltinModel { cubic_quintic, strongly_damped_cubic, stable_quintic };

/// The scalar examples: x0 = 1, r = 4, sigma(x) = x^2 and
///   cubic_quintic          mu = x^3 - 4x^5
///   strongly_damped_cubic  mu = -83x^3
///   stable_quintic         mu = -x - 6x^3 - 4x^5
SdeModel builtin_model(BuiltinModel id);

/// Builtin lookup by name. Besides the three BuiltinModel names this accepts
/// "lipschitz_control" (mu = -x, sigma = 0.1x, r = 0), a globally Lipschitz
/// control problem. Throws std::invalid_argument for unknown names.
SdeModel builtin_model(std::string_view name);

std::optional<BuiltinModel> parse_builtin_model(std::string_view name);
std::string_view to_string(BuiltinModel id);
bool is_builtin_model_name(std::string_view name);

/// Scalar model with polynomial coefficients (ascending powers) and analytic
/// L operator sigma * sigma'.
SdeModel polynomial_model(std::string name, std::vector<double> drift_coeffs, std::vector<double> diffusion_coeffs,
                          double x0, double growth_exponent);

/// Coefficients of a builtin scalar model as ascending-power polynomials.
struct PolynomialCoefficients {
  std::vector<double> drift;
  std::vector<double> diffusion;
  double x0 = 1.0;
  double growth_exponent = 4.0;
};
PolynomialCoefficients builtin_coefficients(std::string_view name);

// ---------------------------------------------------------------------------
// Assumption probes
// ---------------------------------------------------------------------------

enum class AssumptionId {
  A2_1_polyLipschitz,
  A2_2_khasminskii,
  A2_3_derivGrowth,
  A4_1_dissipative,
  Eq4_2_milsteinDissipative,
  Eq4_3_ratioBounded,
};

std::string_view to_string(AssumptionId id);
std::optional<AssumptionId> parse_assumption_id(std::string_view name);

/// k(u) = coeff * u^power.
struct KFunction {
  double coeff = 1.0;
  double power = 1.0;

  double operator()(double u) const;
};

/// Resolves a k-function id; "power" is the only family. Throws
/// PreconditionError for anything else or for coeff < 0, power < 1. A zero
/// coefficient is accepted for degenerate probes (k == 0).
KFunction make_k_function(std::string_view id, double coeff, double power);

struct ProbeSpec {
  std::size_t n_points = 1000;
  double radius = 1.0;
  double p_bar = 1.0;
  std::string k_function = "power";
  /// Named constants: K1, r, K2, lambda3, k_coeff, k_power, delta, ratio_cap.
  std::map<std::string, double> constants;
};

/// Outcome of a sampled falsification attempt. worst_margin <= 0 means no
/// violation was found among the probes; it is never a proof.
struct AssumptionReport {
  AssumptionId assumption_id{};
  std::size_t sampled_points = 0;
  double worst_margin = 0.0;
  std::map<std::string, double> constants_used;
  Vec worst_x;
  Vec worst_y;

  bool violation_found() const noexcept { return worst_margin > 0.0; }
};

/// Evaluates the assumption inequality (LHS - RHS) at Halton probe points in the
/// ball of the given radius and returns the largest margin.
AssumptionReport check_assumption(const SdeModel& model, AssumptionId id, const ProbeSpec& probe);

}  // namespace tmil
