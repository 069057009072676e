#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "tmilstein/config.hpp"
#include "tmilstein/errors.hpp"
#include "tmilstein/runner.hpp"

namespace {

constexpr int kParseError = 2;
constexpr int kValidationError = 3;
constexpr int kRuntimeError = 4;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Truncated Milstein experiments: convergence rates, step conditions, stability, assumption checks"};
  std::string config_path;
  tmil::ConfigOverrides overrides;
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  std::size_t workers = 0;
  std::string out;
  app.add_option("--config", config_path, "Experiment config file")->required();
  auto* seed_opt = app.add_option("--seed", seed, "Master seed");
  auto* paths_opt = app.add_option("--paths", paths, "Number of Monte-Carlo paths")->check(CLI::PositiveNumber);
  auto* workers_opt = app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  auto* out_opt = app.add_option("--out", out, "Output directory (overrides TMILSTEIN_OUT and the config)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kParseError;
  }

  if (*seed_opt) overrides.seed = seed;
  if (*paths_opt) overrides.paths = paths;
  if (*workers_opt) overrides.workers = workers;
  if (*out_opt)
    overrides.out = out;
  else if (const char* env = std::getenv("TMILSTEIN_OUT"); env && *env)
    overrides.out = env;

  try {
    const tmil::RawConfig raw = tmil::load_config_file(config_path);
    const tmil::RunConfig config = tmil::validate_config(raw, overrides);
    const tmil::RunResult result = tmil::run_experiment(config);
    std::cout << result.summary << std::endl;
    return 0;
  } catch (const tmil::ConfigParseError& e) {
    std::cerr << "parse error: " << config_path << ": " << e.what() << "\n";
    return kParseError;
  } catch (const tmil::ConfigValidationError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kValidationError;
  } catch (const tmil::PreconditionError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::exception& e) {
    std::cerr << "experiment failed: " << e.what() << "\n";
    return kRuntimeError;
  }
}
