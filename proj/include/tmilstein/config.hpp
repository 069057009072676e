#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tmilstein/experiments.hpp"
#include "tmilstein/model.hpp"
#include "tmilstein/scheme.hpp"
#include "tmilstein/truncation.hpp"

namespace tmil {

/// Malformed configuration text (exit status 2).
class ConfigParseError : public std::runtime_error {
 public:
  ConfigParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Semantically invalid configuration (exit status 3). field() is the dotted key path.
class ConfigValidationError : public std::runtime_error {
 public:
  ConfigValidationError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Flat key/value view of a config file. Keys are dotted paths; a line
/// `[section]` prefixes following keys with `section.`.
using RawConfig = std::map<std::string, std::string>;

/// Parses `key = value` lines. `#` and `;` start comments, blank lines are
/// ignored, duplicate keys are an error.
RawConfig parse_config_text(std::string_view text);
RawConfig load_config_file(const std::filesystem::path& path);

enum class ExperimentKind { rate, stability, conditions, check };

std::string_view to_string(ExperimentKind kind);

/// Values given on the command line (or environment) that take precedence
/// over the file.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
};

struct RunConfig {
  ExperimentKind kind = ExperimentKind::rate;

  std::string model_name;
  std::optional<std::vector<double>> drift_coeffs;
  std::optional<std::vector<double>> diffusion_coeffs;
  std::optional<double> x0;
  std::optional<double> growth_exponent;

  std::optional<TruncationConfig> truncation;
  SchemeId scheme = SchemeId::truncated_milstein;
  std::optional<SchemeId> reference_scheme;

  double q = 1.0;
  std::optional<double> p;
  std::optional<double> r;

  // rate
  double t_final = 1.28;
  double delta_ref = 0.01 / 8.0;
  std::vector<double> steps;
  ErrorNorm error_norm = ErrorNorm::terminal;
  std::size_t max_paths = 0;
  double target_relative_se = 0.1;

  // stability
  double stability_delta = 0.04;
  std::size_t horizon_steps = 1000;
  double tol_stab = 1e-2;
  std::optional<KFunction> k_function;
  std::size_t record_paths = 10;
  double tail_fraction = 0.1;

  // check
  std::vector<AssumptionId> assumptions;
  ProbeSpec probe;

  std::size_t n_paths = 1000;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::filesystem::path out_dir = "results";

  /// Canonical effective configuration (sorted key = value lines after
  /// overrides; excludes workers and out, which do not affect results).
  std::string canonical_text;
  /// FNV-1a 64-bit hash of canonical_text, as 16 hex digits.
  std::string config_hash;
};

/// Validates and converts a raw config. Throws ConfigValidationError naming
/// the offending field.
RunConfig validate_config(const RawConfig& raw, const ConfigOverrides& overrides = {});

/// The model described by the config: a builtin, optionally with polynomial
/// coefficient, initial value or growth-exponent overrides.
SdeModel build_model(const RunConfig& config);

/// FNV-1a 64-bit hash as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view text);

}  // namespace tmil
