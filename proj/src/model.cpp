#include "tmilstein/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "tmilstein/errors.hpp"
#include "tmilstein/halton.hpp"

namespace tmil {
namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vec difference(std::span<const double> a, std::span<const double> b) {
  Vec d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

void require_finite(const Vec& v, std::size_t expected_size, std::span<const double> x, const char* what) {
  if (v.size() != expected_size) {
    std::ostringstream msg;
    msg << what << " returned " << v.size() << " components, expected " << expected_size;
    throw EvaluationError(msg.str(), Vec(x.begin(), x.end()));
  }
  for (double c : v) {
    if (!std::isfinite(c)) {
      std::ostringstream msg;
      msg << what << " is not finite at x = (";
      for (std::size_t i = 0; i < x.size(); ++i) msg << (i ? ", " : "") << x[i];
      msg << ")";
      throw EvaluationError(msg.str(), Vec(x.begin(), x.end()));
    }
  }
}

double polyval(const std::vector<double>& coeffs, double x) {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

std::vector<double> polyder(const std::vector<double>& coeffs) {
  std::vector<double> d;
  for (std::size_t i = 1; i < coeffs.size(); ++i) d.push_back(static_cast<double>(i) * coeffs[i]);
  return d;
}

// Squared Frobenius norm of the d x m diffusion matrix.
double diffusion_norm_sq(const SdeModel& model, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t j = 0; j < model.drivers; ++j) {
    const Vec col = eval_diffusion(model, x, j);
    s += dot(col, col);
  }
  return s;
}

double diffusion_diff_norm(const SdeModel& model, std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t j = 0; j < model.drivers; ++j) {
    const Vec d = difference(eval_diffusion(model, x, j), eval_diffusion(model, y, j));
    s += dot(d, d);
  }
  return std::sqrt(s);
}

Vec l_op_sum(const SdeModel& model, std::span<const double> x) {
  Vec total(model.dim, 0.0);
  for (std::size_t j1 = 0; j1 < model.drivers; ++j1)
    for (std::size_t j2 = 0; j2 < model.drivers; ++j2) {
      const Vec l = eval_l_op(model, x, j1, j2);
      for (std::size_t i = 0; i < model.dim; ++i) total[i] += l[i];
    }
  return total;
}

double require_constant(const ProbeSpec& probe, AssumptionReport& report, const std::string& key) {
  const auto it = probe.constants.find(key);
  if (it == probe.constants.end()) {
    throw PreconditionError("missing constant '" + key + "' for " + std::string(to_string(report.assumption_id)));
  }
  report.constants_used[key] = it->second;
  return it->second;
}

KFunction require_k(const ProbeSpec& probe, AssumptionReport& report) {
  const double c = require_constant(probe, report, "k_coeff");
  const double g = require_constant(probe, report, "k_power");
  return make_k_function(probe.k_function, c, g);
}

// Scalar component function f(x) for gradient/Hessian probes.
using ScalarFn = std::function<double(std::span<const double>)>;

double gradient_norm(const ScalarFn& f, Vec x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double h = std::max(1e-6, 1e-6 * std::abs(xi));
    x[i] = xi + h;
    const double fp = f(x);
    x[i] = xi - h;
    const double fm = f(x);
    x[i] = xi;
    const double g = (fp - fm) / (2.0 * h);
    s += g * g;
  }
  return std::sqrt(s);
}

double hessian_norm(const ScalarFn& f, Vec x) {
  const std::size_t d = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double hi = 1e-4 * std::max(1.0, std::abs(x[i]));
      const double hk = 1e-4 * std::max(1.0, std::abs(x[k]));
      auto at = [&](double si, double sk) {
        Vec p = x;
        p[i] += si * hi;
        p[k] += sk * hk;
        return f(p);
      };
      const double v = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * hi * hk);
      s += v * v;
    }
  }
  return std::sqrt(s);
}

}  // namespace

Vec eval_drift(const SdeModel& model, std::span<const double> x) {
  Vec v = model.drift(x);
  require_finite(v, model.dim, x, "drift");
  return v;
}

Vec eval_diffusion(const SdeModel& model, std::span<const double> x, std::size_t j) {
  Vec v = model.diffusion_col(x, j);
  require_finite(v, model.dim, x, "diffusion column");
  return v;
}

Vec eval_l_op_fd(const SdeModel& model, std::span<const double> x, std::size_t j1, std::size_t j2) {
  const Vec sigma_j1 = eval_diffusion(model, x, j1);
  Vec result(model.dim, 0.0);
  Vec probe(x.begin(), x.end());
  for (std::size_t l = 0; l < model.dim; ++l) {
    const double xl = x[l];
    const double h = std::max(1e-6, 1e-6 * std::abs(xl));
    probe[l] = xl + h;
    const Vec plus = eval_diffusion(model, probe, j2);
    probe[l] = xl - h;
    const Vec minus = eval_diffusion(model, probe, j2);
    probe[l] = xl;
    for (std::size_t i = 0; i < model.dim; ++i) result[i] += sigma_j1[l] * (plus[i] - minus[i]) / (2.0 * h);
  }
  return result;
}

Vec eval_l_op(const SdeModel& model, std::span<const double> x, std::size_t j1, std::size_t j2) {
  if (j1 >= model.drivers || j2 >= model.drivers) throw PreconditionError("eval_l_op: driver index out of range");
  if (!model.l_op) return eval_l_op_fd(model, x, j1, j2);
  Vec v = model.l_op(x, j1, j2);
  require_finite(v, model.dim, x, "L operator");
  return v;
}

SdeModel polynomial_model(std::string name, std::vector<double> drift_coeffs, std::vector<double> diffusion_coeffs,
                          double x0, double growth_exponent) {
  SdeModel model;
  model.name = std::move(name);
  model.dim = 1;
  model.drivers = 1;
  model.initial_value = {x0};
  model.growth_exponent = growth_exponent;
  std::vector<double> dsigma = polyder(diffusion_coeffs);
  model.drift = [a = std::move(drift_coeffs)](std::span<const double> x) { return Vec{polyval(a, x[0])}; };
  model.diffusion_col = [b = diffusion_coeffs](std::span<const double> x, std::size_t) {
    return Vec{polyval(b, x[0])};
  };
  model.l_op = [b = std::move(diffusion_coeffs), db = std::move(dsigma)](std::span<const double> x, std::size_t,
                                                                         std::size_t) {
    return Vec{polyval(b, x[0]) * polyval(db, x[0])};
  };
  return model;
}

PolynomialCoefficients builtin_coefficients(std::string_view name) {
  if (name == "cubic_quintic") return {{0, 0, 0, 1, 0, -4}, {0, 0, 1}, 1.0, 4.0};
  if (name == "strongly_damped_cubic") return {{0, 0, 0, -83}, {0, 0, 1}, 1.0, 4.0};
  if (name == "stable_quintic") return {{0, -1, 0, -6, 0, -4}, {0, 0, 1}, 1.0, 4.0};
  if (name == "lipschitz_control") return {{0, -1}, {0, 0.1}, 1.0, 0.0};
  throw std::invalid_argument("unknown builtin model '" + std::string(name) + "'");
}

SdeModel builtin_model(std::string_view name) {
  auto c = builtin_coefficients(name);
  return polynomial_model(std::string(name), std::move(c.drift), std::move(c.diffusion), c.x0, c.growth_exponent);
}

SdeModel builtin_model(BuiltinModel id) { return builtin_model(to_string(id)); }

std::string_view to_string(BuiltinModel id) {
  switch (id) {
    case BuiltinModel::cubic_quintic: return "cubic_quintic";
    case BuiltinModel::strongly_damped_cubic: return "strongly_damped_cubic";
    case BuiltinModel::stable_quintic: return "stable_quintic";
  }
  return "?";
}

std::optional<BuiltinModel> parse_builtin_model(std::string_view name) {
  for (auto id : {BuiltinModel::cubic_quintic, BuiltinModel::strongly_damped_cubic, BuiltinModel::stable_quintic})
    if (to_string(id) == name) return id;
  return std::nullopt;
}

bool is_builtin_model_name(std::string_view name) {
  return parse_builtin_model(name).has_value() || name == "lipschitz_control";
}

std::string_view to_string(AssumptionId id) {
  switch (id) {
    case AssumptionId::A2_1_polyLipschitz: return "A2_1_polyLipschitz";
    case AssumptionId::A2_2_khasminskii: return "A2_2_khasminskii";
    case AssumptionId::A2_3_derivGrowth: return "A2_3_derivGrowth";
    case AssumptionId::A4_1_dissipative: return "A4_1_dissipative";
    case AssumptionId::Eq4_2_milsteinDissipative: return "Eq4_2_milsteinDissipative";
    case AssumptionId::Eq4_3_ratioBounded: return "Eq4_3_ratioBounded";
  }
  return "?";
}

std::optional<AssumptionId> parse_assumption_id(std::string_view name) {
  for (auto id : {AssumptionId::A2_1_polyLipschitz, AssumptionId::A2_2_khasminskii, AssumptionId::A2_3_derivGrowth,
                  AssumptionId::A4_1_dissipative, AssumptionId::Eq4_2_milsteinDissipative,
                  AssumptionId::Eq4_3_ratioBounded})
    if (to_string(id) == name) return id;
  return std::nullopt;
}

double KFunction::operator()(double u) const { return coeff * std::pow(u, power); }

KFunction make_k_function(std::string_view id, double coeff, double power) {
  if (id != "power") throw PreconditionError("unknown k-function id '" + std::string(id) + "'");
  if (!(coeff >= 0.0) || !(power >= 1.0)) {
    throw PreconditionError("k-function requires coeff >= 0 and power >= 1");
  }
  return KFunction{coeff, power};
}

AssumptionReport check_assumption(const SdeModel& model, AssumptionId id, const ProbeSpec& probe) {
  if (probe.n_points == 0) throw PreconditionError("check_assumption: n_points must be >= 1");
  if (!(probe.radius > 0.0)) throw PreconditionError("check_assumption: radius must be positive");

  AssumptionReport report;
  report.assumption_id = id;
  report.sampled_points = probe.n_points;
  report.worst_margin = -std::numeric_limits<double>::infinity();

  auto record = [&](double margin, std::span<const double> x, std::span<const double> y) {
    if (margin > report.worst_margin) {
      report.worst_margin = margin;
      report.worst_x.assign(x.begin(), x.end());
      report.worst_y.assign(y.begin(), y.end());
    }
  };

  switch (id) {
    case AssumptionId::A2_1_polyLipschitz: {
      const double k1 = require_constant(probe, report, "K1");
      const double r = require_constant(probe, report, "r");
      for (const auto& [x, y] : halton_ball_pairs(model.dim, probe.n_points, probe.radius)) {
        double lhs = norm(difference(eval_drift(model, x), eval_drift(model, y)));
        lhs = std::max(lhs, diffusion_diff_norm(model, x, y));
        for (std::size_t j1 = 0; j1 < model.drivers; ++j1)
          for (std::size_t j2 = 0; j2 < model.drivers; ++j2)
            lhs = std::max(lhs, norm(difference(eval_l_op(model, x, j1, j2), eval_l_op(model, y, j1, j2))));
        const double rhs = k1 * (1.0 + std::pow(norm(x), r) + std::pow(norm(y), r)) * norm(difference(x, y));
        record(lhs - rhs, x, y);
      }
      break;
    }
    case AssumptionId::A2_2_khasminskii: {
      const double k2 = require_constant(probe, report, "K2");
      report.constants_used["p_bar"] = probe.p_bar;
      for (const auto& [x, y] : halton_ball_pairs(model.dim, probe.n_points, probe.radius)) {
        const Vec dx = difference(x, y);
        const double sd = diffusion_diff_norm(model, x, y);
        const double lhs =
            dot(dx, difference(eval_drift(model, x), eval_drift(model, y))) + (2.0 * probe.p_bar - 1.0) * sd * sd;
        record(lhs - k2 * dot(dx, dx), x, y);
      }
      break;
    }
    case AssumptionId::A2_3_derivGrowth: {
      const double lambda3 = require_constant(probe, report, "lambda3");
      const double r = require_constant(probe, report, "r");
      for (const auto& x : halton_ball_points(model.dim, probe.n_points, probe.radius)) {
        double lhs = 0.0;
        for (std::size_t l = 0; l < model.dim; ++l) {
          const ScalarFn mu_l = [&](std::span<const double> p) { return eval_drift(model, p)[l]; };
          lhs = std::max({lhs, gradient_norm(mu_l, x), hessian_norm(mu_l, x)});
          for (std::size_t j = 0; j < model.drivers; ++j) {
            const ScalarFn s_lj = [&](std::span<const double> p) { return eval_diffusion(model, p, j)[l]; };
            lhs = std::max({lhs, gradient_norm(s_lj, x), hessian_norm(s_lj, x)});
          }
        }
        record(lhs - lambda3 * (1.0 + std::pow(norm(x), r + 1.0)), x, {});
      }
      break;
    }
    case AssumptionId::A4_1_dissipative:
    case AssumptionId::Eq4_2_milsteinDissipative: {
      const KFunction k = require_k(probe, report);
      const double delta = id == AssumptionId::Eq4_2_milsteinDissipative ? require_constant(probe, report, "delta") : 0.0;
      for (const auto& x : halton_ball_points(model.dim, probe.n_points, probe.radius)) {
        double lhs = 2.0 * dot(x, eval_drift(model, x)) + diffusion_norm_sq(model, x);
        if (id == AssumptionId::Eq4_2_milsteinDissipative) {
          const Vec l = l_op_sum(model, x);
          lhs += 0.5 * dot(l, l) * delta;
        }
        record(lhs + k(norm(x)), x, {});
      }
      break;
    }
    case AssumptionId::Eq4_3_ratioBounded: {
      const KFunction k = require_k(probe, report);
      const auto cap_it = probe.constants.find("ratio_cap");
      const double cap = cap_it == probe.constants.end() ? 1e12 : cap_it->second;
      report.constants_used["ratio_cap"] = cap;
      for (const auto& x : halton_ball_points(model.dim, probe.n_points, probe.radius)) {
        const double u = norm(x);
        if (u == 0.0) continue;
        const Vec mu = eval_drift(model, x);
        record(dot(mu, mu) / k(u) - cap, x, {});
      }
      break;
    }
  }
  return report;
}

}  // namespace tmil
