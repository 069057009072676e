#include "tmilstein/runner.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include <json.hpp>

#include "tmilstein/errors.hpp"
#include "tmilstein/experiments.hpp"

namespace tmil {
namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

std::string header(const RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& extra) {
  std::ostringstream out;
  out << "# tmilstein " << kArtifactVersion << "\n";
  out << "# config_hash: " << cfg.config_hash << "\n";
  out << "# seed: " << cfg.seed << "\n";
  out << "# kind: " << to_string(cfg.kind) << "\n";
  out << "# model: " << cfg.model_name << "\n";
  if (cfg.truncation) out << "# truncation: " << cfg.truncation->describe() << "\n";
  for (const auto& [k, v] : extra) out << "# " << k << ": " << v << "\n";
  return out.str();
}

Json meta(const RunConfig& cfg) {
  Json j;
  j["version"] = std::string(kArtifactVersion);
  j["config_hash"] = cfg.config_hash;
  j["seed"] = cfg.seed;
  j["kind"] = std::string(to_string(cfg.kind));
  j["model"] = cfg.model_name;
  if (cfg.truncation) j["truncation"] = cfg.truncation->describe();
  return j;
}

// NaN and infinities have no JSON number form.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(format_double(v)); }

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigValidationError("out", "cannot create directory '" + dir.string() + "'");
  const fs::path probe = dir / ".tmilstein-write-probe";
  {
    std::ofstream f(probe);
    if (!f) throw ConfigValidationError("out", "directory '" + dir.string() + "' is not writable");
  }
  fs::remove(probe, ec);
}

Json exponents_json(const ErrorBoundExponents& e) {
  Json j;
  j["discretization"] = e.discretization.str();
  j["truncation"] = e.truncation.str();
  j["dominant"] = e.dominant.str();
  return j;
}

Json conditions_json(const StepConditionComparison& c) {
  Json j;
  j["old_threshold"] = number(c.old_threshold.delta);
  j["old_threshold_log"] = number(c.old_threshold.log_delta);
  j["new_threshold"] = number(c.new_threshold);
  j["dominant_rate"] = number(c.dominant_rate);
  j["exponents"] = exponents_json(c.exponents);
  return j;
}

double resolved_r(const RunConfig& cfg) {
  if (cfg.r) return *cfg.r;
  return build_model(cfg).growth_exponent;
}

RunResult run_rate(const RunConfig& cfg) {
  RateExperimentSpec spec;
  spec.model = build_model(cfg);
  spec.truncation = *cfg.truncation;
  spec.scheme = cfg.scheme;
  spec.reference_scheme = cfg.reference_scheme;
  spec.q = cfg.q;
  spec.t_final = cfg.t_final;
  spec.delta_ref = cfg.delta_ref;
  spec.test_steps = cfg.steps;
  spec.n_paths = cfg.n_paths;
  spec.max_paths = cfg.max_paths;
  spec.target_relative_se = cfg.target_relative_se;
  spec.master_seed = cfg.seed;
  spec.workers = cfg.workers;
  spec.error_norm = cfg.error_norm;
  const RateFit fit = run_rate_experiment(spec);

  const std::vector<std::pair<std::string, std::string>> extra = {
      {"scheme", std::string(to_string(cfg.scheme))},
      {"reference_scheme", std::string(to_string(cfg.reference_scheme.value_or(cfg.scheme)))},
      {"q", format_double(cfg.q)},
      {"t_final", format_double(cfg.t_final)},
      {"delta_ref", format_double(cfg.delta_ref)},
      {"error_norm", cfg.error_norm == ErrorNorm::terminal ? "terminal" : "sup"},
  };
  std::ostringstream csv;
  csv << header(cfg, extra);
  csv << "delta,coarsen_factor,paths_used,blowups,error_moment,error_moment_se,error_norm,error_norm_se\n";
  for (const auto& p : fit.points) {
    csv << format_double(p.delta) << ',' << p.coarsen_factor << ',' << p.paths_used << ',' << p.blowups << ','
        << format_double(p.error_moment) << ',' << format_double(p.error_moment_se) << ','
        << format_double(p.error_norm) << ',' << format_double(p.error_norm_se) << '\n';
  }

  Json j = meta(cfg);
  j["scheme"] = std::string(to_string(cfg.scheme));
  j["q"] = cfg.q;
  j["n_paths"] = fit.n_paths;
  j["slope"] = number(fit.slope);
  j["slope_se"] = number(fit.slope_se);
  j["intercept"] = number(fit.intercept);
  j["moment_slope"] = number(fit.moment_slope);
  j["moment_slope_se"] = number(fit.moment_slope_se);
  j["errors_monotone"] = errors_monotone(fit);
  if (cfg.p && cfg.truncation->is_power_law()) {
    const double r = resolved_r(cfg);
    if (*cfg.p > (1.0 + r) * cfg.q) j["conditions"] = conditions_json(compare_step_conditions(*cfg.truncation, cfg.q, *cfg.p, r));
  }

  const fs::path rates = cfg.out_dir / "rates.csv";
  const fs::path summary = cfg.out_dir / "summary.json";
  write_file_atomic(rates, csv.str());
  write_file_atomic(summary, j.dump(2) + "\n");

  std::ostringstream line;
  line << "slope = " << format_double(fit.slope) << " (se " << format_double(fit.slope_se) << ") over "
       << fit.n_paths << " paths; moment slope = " << format_double(fit.moment_slope);
  return {line.str(), {rates, summary}};
}

RunResult run_conditions(const RunConfig& cfg) {
  const double r = resolved_r(cfg);
  const StepConditionComparison c = compare_step_conditions(*cfg.truncation, cfg.q, *cfg.p, r);
  Json j = meta(cfg);
  j["q"] = cfg.q;
  j["p"] = *cfg.p;
  j["r"] = r;
  j.update(conditions_json(c));

  const fs::path summary = cfg.out_dir / "summary.json";
  write_file_atomic(summary, j.dump(2) + "\n");
  std::ostringstream line;
  line << "old threshold = " << format_double(c.old_threshold.delta) << ", new threshold = "
       << format_double(c.new_threshold) << ", dominant rate = " << c.exponents.dominant.str() << " ("
       << format_double(c.dominant_rate) << ")";
  return {line.str(), {summary}};
}

RunResult run_stability(const RunConfig& cfg) {
  const SdeModel model = build_model(cfg);
  const StabilityConstants constants = compute_stability_constants(model, *cfg.truncation, *cfg.k_function);

  StabilityEnsembleSpec spec;
  spec.delta = cfg.stability_delta;
  spec.n_paths = cfg.n_paths;
  spec.horizon_steps = cfg.horizon_steps;
  spec.tol_stab = cfg.tol_stab;
  spec.tail_fraction = cfg.tail_fraction;
  spec.master_seed = cfg.seed;
  spec.workers = cfg.workers;
  spec.record_paths = cfg.record_paths;
  spec.delta_1 = constants.delta_1;
  spec.scheme = cfg.scheme;
  const StabilityDecay decay = run_stability_ensemble(model, *cfg.truncation, spec);

  const std::vector<std::pair<std::string, std::string>> extra = {
      {"scheme", std::string(to_string(cfg.scheme))},
      {"delta", format_double(cfg.stability_delta)},
      {"horizon_steps", std::to_string(cfg.horizon_steps)},
  };
  std::ostringstream csv;
  csv << header(cfg, extra);
  csv << "path,k,norm\n";
  for (std::size_t p = 0; p < decay.recorded_norms.size(); ++p) {
    const auto& norms = decay.recorded_norms[p];
    for (std::size_t k = 0; k < norms.size(); ++k) csv << p << ',' << k << ',' << format_double(norms[k]) << '\n';
  }

  Json j = meta(cfg);
  j["scheme"] = std::string(to_string(cfg.scheme));
  Json c;
  c["radius"] = number(constants.radius);
  c["H"] = number(constants.H);
  c["H_argmax"] = number(constants.H_argmax);
  c["delta_1"] = number(constants.delta_1);
  c["ratio_near_zero"] = number(constants.ratio_near_zero);
  if (constants.published_H) c["published_H"] = *constants.published_H;
  if (constants.published_delta_1) c["published_delta_1"] = *constants.published_delta_1;
  c["differs_from_published"] = constants.differs_from_published;
  j["constants"] = c;
  Json d;
  d["delta"] = decay.delta;
  d["horizon_steps"] = decay.horizon_steps;
  d["tol_stab"] = decay.tol_stab;
  d["tail_fraction"] = cfg.tail_fraction;
  d["n_paths"] = cfg.n_paths;
  d["decay_fraction"] = number(decay.decay_fraction);
  d["blowups"] = decay.blowups;
  if (decay.warning) d["warning"] = *decay.warning;
  j["decay"] = d;

  const fs::path stability = cfg.out_dir / "stability.csv";
  const fs::path summary = cfg.out_dir / "summary.json";
  write_file_atomic(stability, csv.str());
  write_file_atomic(summary, j.dump(2) + "\n");

  std::ostringstream line;
  line << "delta_1 = " << format_double(constants.delta_1) << " (H = " << format_double(constants.H)
       << "); decay fraction = " << format_double(decay.decay_fraction) << " at delta = "
       << format_double(decay.delta) << " over " << cfg.n_paths << " paths";
  if (constants.differs_from_published)
    line << "; published H = " << format_double(*constants.published_H)
         << ", delta_1 = " << format_double(*constants.published_delta_1);
  return {line.str(), {stability, summary}};
}

RunResult run_check(const RunConfig& cfg) {
  const SdeModel model = build_model(cfg);
  std::vector<AssumptionReport> reports;
  for (AssumptionId id : cfg.assumptions) {
    try {
      reports.push_back(check_assumption(model, id, cfg.probe));
    } catch (const PreconditionError& e) {
      throw ConfigValidationError("check", std::string(to_string(id)) + ": " + e.what());
    }
  }

  const std::vector<std::pair<std::string, std::string>> extra = {
      {"points", std::to_string(cfg.probe.n_points)},
      {"radius", format_double(cfg.probe.radius)},
      {"p_bar", format_double(cfg.probe.p_bar)},
  };
  std::ostringstream csv;
  csv << header(cfg, extra);
  csv << "assumption,sampled_points,worst_margin,violation\n";
  Json list = Json::array();
  std::size_t violations = 0;
  std::string first_violation;
  for (const auto& r : reports) {
    csv << to_string(r.assumption_id) << ',' << r.sampled_points << ',' << format_double(r.worst_margin) << ','
        << (r.violation_found() ? 1 : 0) << '\n';
    Json e;
    e["assumption"] = std::string(to_string(r.assumption_id));
    e["sampled_points"] = r.sampled_points;
    e["worst_margin"] = number(r.worst_margin);
    e["violation"] = r.violation_found();
    Json consts = Json::object();
    for (const auto& [k, v] : r.constants_used) consts[k] = number(v);
    e["constants"] = consts;
    Json wx = Json::array();
    for (double v : r.worst_x) wx.push_back(number(v));
    e["worst_x"] = wx;
    if (!r.worst_y.empty()) {
      Json wy = Json::array();
      for (double v : r.worst_y) wy.push_back(number(v));
      e["worst_y"] = wy;
    }
    list.push_back(e);
    if (r.violation_found()) {
      if (violations == 0) first_violation = std::string(to_string(r.assumption_id));
      ++violations;
    }
  }
  Json j = meta(cfg);
  j["reports"] = list;

  const fs::path checks = cfg.out_dir / "checks.csv";
  const fs::path summary = cfg.out_dir / "summary.json";
  write_file_atomic(checks, csv.str());
  write_file_atomic(summary, j.dump(2) + "\n");

  std::ostringstream line;
  line << "checked " << reports.size() << " assumption(s): " << violations << " violation(s)";
  if (violations) line << " (first: " << first_violation << ")";
  return {line.str(), {checks, summary}};
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

RunResult run_experiment(const RunConfig& config) {
  prepare_out_dir(config.out_dir);
  switch (config.kind) {
    case ExperimentKind::rate: return run_rate(config);
    case ExperimentKind::stability: return run_stability(config);
    case ExperimentKind::conditions: return run_conditions(config);
    case ExperimentKind::check: return run_check(config);
  }
  throw std::logic_error("unhandled experiment kind");
}

}  // namespace tmil
