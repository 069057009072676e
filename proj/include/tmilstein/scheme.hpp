#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tmilstein/brownian.hpp"
#include "tmilstein/model.hpp"
#include "tmilstein/truncation.hpp"

namespace tmil {

/// Classical variants are the truncated ones with the projection replaced by
/// the identity; the EM variants drop the L-operator correction.
enum class SchemeId { truncated_milstein, truncated_em, classical_milstein, classical_em };

std::string_view to_string(SchemeId id);
std::optional<SchemeId> parse_scheme_id(std::string_view name);
bool is_truncated(SchemeId id);
bool uses_milstein_correction(SchemeId id);

/// One step from coefficients already evaluated at the (possibly projected) point:
///   y + mu dt + sum_j sigma_j dB^j [+ 1/2 sum_{j1,j2} L^{j1} sigma_{j2} (dB^{j1} dB^{j2} - [j1 == j2] dt)]
/// The double sum uses products of increments in place of iterated integrals,
/// which is exact for one driver or commutative noise; Levy areas are not sampled.
Vec apply_increment(const CoefficientBlock& coeffs, bool milstein_correction, double delta, std::span<const double> y,
                    std::span<const double> dB);

/// Truncated Milstein step with every coefficient evaluated once at pi_delta(y).
Vec step_truncated_milstein(const SdeModel& model, const TruncationConfig& cfg, double delta,
                            std::span<const double> y, std::span<const double> dB);

/// Generic step. Classical schemes evaluate coefficients without finiteness
/// checks and may return non-finite values; callers treat that as blow-up.
/// Throws PreconditionError for delta outside (0, 1] or dB of the wrong size.
Vec step(SchemeId scheme, const SdeModel& model, const TruncationConfig& cfg, double delta, std::span<const double> y,
         std::span<const double> dB);

/// Knots of the step process on t_k = k delta. After a blow-up every later
/// state is absent (std::nullopt).
struct Trajectory {
  std::vector<double> times;
  std::vector<std::optional<Vec>> states;
  SchemeId scheme{};
  double delta = 0.0;
  bool blew_up = false;
  /// First index whose state was non-finite (states.size() when none).
  std::size_t blowup_index = 0;
};

/// Runs the scheme over grid.coarsen(coarsen_factor). Throws PreconditionError
/// unless the factor divides the grid and the resulting step lies in (0, 1].
Trajectory simulate(SchemeId scheme, const SdeModel& model, const TruncationConfig& cfg, const BrownianGrid& grid,
                    std::size_t coarsen_factor);

/// Writes `k,t,x1..xd` rows behind `#` header lines naming the scheme, step,
/// seed, model and truncation. Absent states (after a blow-up) have empty fields.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const SdeModel& model,
                          const TruncationConfig& cfg, std::uint64_t seed);

struct PathOutcome {
  Vec terminal;
  bool blew_up = false;
  /// Number of steps taken before stopping (all of them unless blew_up).
  std::size_t steps_completed = 0;
};

/// Visitor receiving (k, Y_k) for every finite knot including k = 0.
using StateObserver = std::function<void(std::size_t, std::span<const double>)>;

/// Allocation-light integration over an already coarsened grid; the step is
/// grid.dt(). Used by the ensemble drivers.
PathOutcome integrate_path(SchemeId scheme, const SdeModel& model, const TruncationConfig& cfg,
                           const BrownianGrid& grid, std::span<const double> x0, const StateObserver& observer = {});

}  // namespace tmil
