#include "tmilstein/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "tmilstein/errors.hpp"
#include "tmilstein/stats.hpp"

namespace tmil {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

const std::set<std::string, std::less<>>& known_keys() {
  static const std::set<std::string, std::less<>> keys = {
      "kind",
      "model.name",
      "model.x0",
      "model.drift",
      "model.diffusion",
      "model.r",
      "truncation.omega.coeff",
      "truncation.omega.power",
      "truncation.h.coeff",
      "truncation.h.power",
      "truncation.h_bar",
      "scheme",
      "reference_scheme",
      "q",
      "p",
      "r",
      "rate.t_final",
      "rate.delta_ref",
      "rate.steps",
      "rate.norm",
      "rate.max_paths",
      "rate.target_se",
      "stability.delta",
      "stability.horizon",
      "stability.tol",
      "stability.k.coeff",
      "stability.k.power",
      "stability.record_paths",
      "stability.tail_fraction",
      "check.assumptions",
      "check.points",
      "check.radius",
      "check.p_bar",
      "check.k",
      "check.K1",
      "check.K2",
      "check.r",
      "check.lambda3",
      "check.k_coeff",
      "check.k_power",
      "check.delta",
      "check.ratio_cap",
      "paths",
      "seed",
      "workers",
      "out",
  };
  return keys;
}

class Reader {
 public:
  explicit Reader(const RawConfig& raw) : raw_(raw) {}

  bool has(const std::string& key) const { return raw_.count(key) != 0; }

  std::optional<std::string> text(const std::string& key) const {
    const auto it = raw_.find(key);
    if (it == raw_.end()) return std::nullopt;
    return it->second;
  }

  std::string required_text(const std::string& key) const {
    auto v = text(key);
    if (!v || v->empty()) throw ConfigValidationError(key, "required field is missing");
    return *v;
  }

  std::optional<double> real(const std::string& key) const {
    const auto v = text(key);
    if (!v) return std::nullopt;
    return parse_real(key, *v);
  }

  double required_real(const std::string& key) const {
    const auto v = real(key);
    if (!v) throw ConfigValidationError(key, "required field is missing");
    return *v;
  }

  std::optional<std::uint64_t> count(const std::string& key) const {
    const auto v = text(key);
    if (!v) return std::nullopt;
    std::uint64_t out = 0;
    const auto* end = v->data() + v->size();
    const auto [ptr, ec] = std::from_chars(v->data(), end, out);
    if (ec != std::errc() || ptr != end) throw ConfigValidationError(key, "expected a non-negative integer");
    return out;
  }

  std::optional<std::vector<double>> reals(const std::string& key) const {
    const auto v = text(key);
    if (!v) return std::nullopt;
    std::vector<double> out;
    std::string_view rest = *v;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto item = trim(rest.substr(0, comma));
      if (item.empty()) throw ConfigValidationError(key, "empty list element");
      out.push_back(parse_real(key, std::string(item)));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    if (out.empty()) throw ConfigValidationError(key, "list must not be empty");
    return out;
  }

  std::vector<std::string> words(const std::string& key) const {
    std::vector<std::string> out;
    const auto v = text(key);
    if (!v) return out;
    std::string_view rest = *v;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto item = trim(rest.substr(0, comma));
      if (!item.empty()) out.emplace_back(item);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    return out;
  }

 private:
  static double parse_real(const std::string& key, const std::string& v) {
    errno = 0;
    char* end = nullptr;
    const double out = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(out))
      throw ConfigValidationError(key, "expected a finite real number, got '" + v + "'");
    return out;
  }

  const RawConfig& raw_;
};

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigValidationError(field, what);
}

}  // namespace

RawConfig parse_config_text(std::string_view text) {
  RawConfig raw;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto comment = line.find_first_of("#;");
    line = trim(line.substr(0, comment));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigParseError(line_no, "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) throw ConfigParseError(line_no, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigParseError(line_no, "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigParseError(line_no, "empty key");
    if (key.find_first_of(" \t") != std::string_view::npos) throw ConfigParseError(line_no, "whitespace in key");
    std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    if (!raw.emplace(full, std::string(value)).second) throw ConfigParseError(line_no, "duplicate key '" + full + "'");
  }
  return raw;
}

RawConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigParseError(0, "cannot open config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::rate: return "rate";
    case ExperimentKind::stability: return "stability";
    case ExperimentKind::conditions: return "conditions";
    case ExperimentKind::check: return "check";
  }
  return "?";
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig validate_config(const RawConfig& raw_in, const ConfigOverrides& overrides) {
  RawConfig raw = raw_in;
  if (overrides.seed) raw["seed"] = std::to_string(*overrides.seed);
  if (overrides.paths) raw["paths"] = std::to_string(*overrides.paths);
  if (overrides.workers) raw["workers"] = std::to_string(*overrides.workers);
  if (overrides.out) raw["out"] = *overrides.out;

  for (const auto& [key, value] : raw)
    if (!known_keys().count(key)) throw ConfigValidationError(key, "unknown field");

  const Reader in(raw);
  RunConfig cfg;

  const std::string kind = in.required_text("kind");
  if (kind == "rate")
    cfg.kind = ExperimentKind::rate;
  else if (kind == "stability")
    cfg.kind = ExperimentKind::stability;
  else if (kind == "conditions")
    cfg.kind = ExperimentKind::conditions;
  else if (kind == "check")
    cfg.kind = ExperimentKind::check;
  else
    throw ConfigValidationError("kind", "expected one of rate, stability, conditions, check");

  cfg.model_name = in.required_text("model.name");
  require(is_builtin_model_name(cfg.model_name), "model.name", "unknown builtin model '" + cfg.model_name + "'");
  cfg.drift_coeffs = in.reals("model.drift");
  cfg.diffusion_coeffs = in.reals("model.diffusion");
  cfg.x0 = in.real("model.x0");
  cfg.growth_exponent = in.real("model.r");
  if (cfg.growth_exponent) require(*cfg.growth_exponent >= 0.0, "model.r", "must be >= 0");

  const bool needs_truncation = cfg.kind != ExperimentKind::check;
  if (needs_truncation || in.has("truncation.omega.coeff")) {
    const PowerLaw omega{in.required_real("truncation.omega.coeff"), in.required_real("truncation.omega.power")};
    const PowerLaw h{in.required_real("truncation.h.coeff"), in.required_real("truncation.h.power")};
    const double h_bar = in.real("truncation.h_bar").value_or(std::max(1.0, h.coeff));
    try {
      cfg.truncation = TruncationConfig::power_law(omega, h, h_bar);
    } catch (const PreconditionError& e) {
      throw ConfigValidationError("truncation", e.what());
    }
  }

  if (const auto s = in.text("scheme")) {
    const auto id = parse_scheme_id(*s);
    require(id.has_value(), "scheme", "unknown scheme '" + *s + "'");
    cfg.scheme = *id;
  }
  if (const auto s = in.text("reference_scheme")) {
    const auto id = parse_scheme_id(*s);
    require(id.has_value(), "reference_scheme", "unknown scheme '" + *s + "'");
    cfg.reference_scheme = *id;
  }

  cfg.q = in.real("q").value_or(1.0);
  require(cfg.q >= 1.0, "q", "must be >= 1");
  cfg.p = in.real("p");
  cfg.r = in.real("r");

  cfg.n_paths = in.count("paths").value_or(1000);
  require(cfg.n_paths >= 1, "paths", "must be >= 1");
  cfg.seed = in.count("seed").value_or(0);
  cfg.workers = in.count("workers").value_or(1);
  require(cfg.workers >= 1, "workers", "must be >= 1");
  cfg.out_dir = in.text("out").value_or("results");
  require(!cfg.out_dir.empty(), "out", "must not be empty");

  switch (cfg.kind) {
    case ExperimentKind::rate: {
      cfg.t_final = in.real("rate.t_final").value_or(1.28);
      require(cfg.t_final > 0.0, "rate.t_final", "must be positive");
      cfg.delta_ref = in.real("rate.delta_ref").value_or(0.01 / 8.0);
      require(cfg.delta_ref > 0.0 && cfg.delta_ref <= 1.0, "rate.delta_ref", "must lie in (0, 1]");
      const auto steps = in.reals("rate.steps");
      require(steps.has_value(), "rate.steps", "step ladder is required for rate runs");
      cfg.steps = *steps;
      require(cfg.steps.size() >= 3, "rate.steps", "at least 3 step sizes are required for a slope fit");
      for (double s : cfg.steps) {
        require(s > 0.0 && s <= 1.0, "rate.steps", "steps must lie in (0, 1]");
        try {
          const std::size_t f = integer_ratio(s, cfg.delta_ref, "rate.steps / rate.delta_ref");
          const std::size_t n = integer_ratio(cfg.t_final, cfg.delta_ref, "rate.t_final / rate.delta_ref");
          require(n % f == 0, "rate.steps", "every step must divide rate.t_final");
        } catch (const PreconditionError& e) {
          throw ConfigValidationError("rate.steps", e.what());
        }
      }
      const std::string norm = in.text("rate.norm").value_or("terminal");
      if (norm == "terminal")
        cfg.error_norm = ErrorNorm::terminal;
      else if (norm == "sup")
        cfg.error_norm = ErrorNorm::sup;
      else
        throw ConfigValidationError("rate.norm", "expected terminal or sup");
      cfg.max_paths = in.count("rate.max_paths").value_or(0);
      cfg.target_relative_se = in.real("rate.target_se").value_or(0.1);
      require(cfg.target_relative_se > 0.0, "rate.target_se", "must be positive");
      require(cfg.n_paths >= 2, "paths", "rate runs need at least 2 paths");
      break;
    }
    case ExperimentKind::stability: {
      cfg.stability_delta = in.required_real("stability.delta");
      require(cfg.stability_delta > 0.0 && cfg.stability_delta <= 1.0, "stability.delta", "must lie in (0, 1]");
      const double horizon = in.required_real("stability.horizon");
      require(horizon > 0.0, "stability.horizon", "must be positive");
      try {
        cfg.horizon_steps = integer_ratio(horizon, cfg.stability_delta, "stability.horizon / stability.delta");
      } catch (const PreconditionError& e) {
        throw ConfigValidationError("stability.horizon", e.what());
      }
      cfg.tol_stab = in.real("stability.tol").value_or(1e-2);
      require(cfg.tol_stab > 0.0, "stability.tol", "must be positive");
      const double kc = in.required_real("stability.k.coeff");
      const double kp = in.required_real("stability.k.power");
      require(kc > 0.0, "stability.k.coeff", "must be positive");
      require(kp >= 1.0, "stability.k.power", "must be >= 1");
      cfg.k_function = KFunction{kc, kp};
      cfg.record_paths = in.count("stability.record_paths").value_or(10);
      cfg.tail_fraction = in.real("stability.tail_fraction").value_or(0.1);
      require(cfg.tail_fraction > 0.0 && cfg.tail_fraction <= 1.0, "stability.tail_fraction", "must lie in (0, 1]");
      break;
    }
    case ExperimentKind::conditions: {
      require(cfg.p.has_value(), "p", "required for conditions runs");
      const double r = cfg.r.value_or(cfg.growth_exponent.value_or(builtin_coefficients(cfg.model_name).growth_exponent));
      cfg.r = r;
      require(*cfg.p > (1.0 + r) * cfg.q, "p", "must exceed (1 + r) q");
      break;
    }
    case ExperimentKind::check: {
      const auto names = in.words("check.assumptions");
      require(!names.empty(), "check.assumptions", "list at least one assumption");
      for (const auto& n : names) {
        const auto id = parse_assumption_id(n);
        require(id.has_value(), "check.assumptions", "unknown assumption '" + n + "'");
        cfg.assumptions.push_back(*id);
      }
      cfg.probe.n_points = in.count("check.points").value_or(1000);
      require(cfg.probe.n_points >= 1, "check.points", "must be >= 1");
      cfg.probe.radius = in.real("check.radius").value_or(2.0);
      require(cfg.probe.radius > 0.0, "check.radius", "must be positive");
      cfg.probe.p_bar = in.real("check.p_bar").value_or(1.0);
      cfg.probe.k_function = in.text("check.k").value_or("power");
      for (const char* c : {"K1", "K2", "r", "lambda3", "k_coeff", "k_power", "delta", "ratio_cap"}) {
        if (const auto v = in.real(std::string("check.") + c)) cfg.probe.constants[c] = *v;
      }
      break;
    }
  }

  std::ostringstream canonical;
  for (const auto& [key, value] : raw) {
    if (key == "workers" || key == "out") continue;
    canonical << key << " = " << value << "\n";
  }
  if (!raw.count("seed")) canonical << "seed = " << cfg.seed << "\n";
  if (!raw.count("paths")) canonical << "paths = " << cfg.n_paths << "\n";
  cfg.canonical_text = canonical.str();
  cfg.config_hash = fnv1a_hex(cfg.canonical_text);
  return cfg;
}

SdeModel build_model(const RunConfig& config) {
  PolynomialCoefficients c = builtin_coefficients(config.model_name);
  if (config.drift_coeffs) c.drift = *config.drift_coeffs;
  if (config.diffusion_coeffs) c.diffusion = *config.diffusion_coeffs;
  if (config.x0) c.x0 = *config.x0;
  if (config.growth_exponent) c.growth_exponent = *config.growth_exponent;
  return polynomial_model(config.model_name, std::move(c.drift), std::move(c.diffusion), c.x0, c.growth_exponent);
}

}  // namespace tmil
