#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tmilstein/config.hpp"

namespace tmil {

inline constexpr std::string_view kArtifactVersion = "1.0.0";

struct RunResult {
  /// One-line human summary (slope, delta_1 or thresholds).
  std::string summary;
  std::vector<std::filesystem::path> files;
};

/// Runs the configured experiment and writes its artifacts into
/// config.out_dir. Throws ConfigValidationError if the directory is not
/// writable; experiment failures propagate unchanged.
RunResult run_experiment(const RunConfig& config);

/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Shortest round-trip decimal form of a double ("nan", "inf", "-inf" for
/// non-finite values).
std::string format_double(double value);

}  // namespace tmil
