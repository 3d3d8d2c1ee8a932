#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlhf_lab/environment.hpp"
#include "rlhf_lab/types.hpp"

namespace rlhflab {

enum class OptimizerKind { kGA, kSGA };

const char* to_string(OptimizerKind kind);

/// Step-size rule and budget of one optimizer run.
struct Schedule {
  OptimizerKind kind = OptimizerKind::kGA;
  /// GA: constant step 1/L_f. SGA: eta_t = base_step / sqrt(t) with base 1/(2 L_f).
  double base_step = 0.0;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  /// Full-gradient evaluation stride (SGA); GA evaluates every iterate.
  std::size_t stride = 1;

  double step_at(std::size_t t) const;
};

/// Raised when an optimizer run breaks a proven invariant (iterate bound or
/// the GA gradient-norm bound). Indicates a bug, never bad luck.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Iterate history. Iterates are numbered t = 1..T+1 (theta_1 is the
/// initialization); `steps[i]` is the number of the i-th recorded iterate.
struct OptimizerTrace {
  std::vector<std::size_t> steps;
  std::vector<ParamVector> iterates;
  std::vector<double> grad_norms;
  std::size_t selected_index = 0;
  Schedule schedule;

  ParamVector final_iterate;
  /// Largest ||theta_t|| over every iterate, recorded or not.
  double max_iterate_norm = 0.0;
  /// Number of iterates whose full gradient was evaluated.
  std::size_t evaluations = 0;
  /// GA only: 12 L_f R C / T and whether min_t ||grad||^2 stayed below it.
  double ga_bound = std::numeric_limits<double>::quiet_NaN();
  bool ga_bound_holds = true;
  bool iterates_bounded = true;

  const ParamVector& selected() const { return iterates.at(selected_index); }
  double selected_grad_norm() const { return grad_norms.at(selected_index); }
};

using CheckpointObserver =
    std::function<void(std::size_t iterate, const ParamVector& best, double best_grad_norm)>;

struct RunOptions {
  /// Cap on stored iterates; beyond it the stored set is a geometric grid.
  std::size_t max_recorded = 10000;
  /// SGA full-gradient stride; 0 selects max(1, T / 10^4).
  std::size_t stride = 0;
  /// Iterate numbers at which `on_checkpoint` receives the best iterate so far.
  std::vector<std::size_t> checkpoints;
  CheckpointObserver on_checkpoint;
  /// Throw InvariantViolation instead of only flagging the trace.
  bool enforce_invariants = true;
};

/// Gradient ascent with eta = 1/L_f for T steps from theta_init.
/// Throws std::invalid_argument if T = 0 or ||theta_init|| > D.
OptimizerTrace run_ga(const Environment& env, const Dataset& S, const Vector& theta_init,
                      std::size_t steps, const RunOptions& options = {});

/// Stochastic gradient ascent with eta_t = 1/(2 L_f sqrt(t)) and uniformly
/// sampled example indices. Reproducible given `seed`.
OptimizerTrace run_sga(const Environment& env, const Dataset& S, const Vector& theta_init,
                       std::size_t steps, std::uint64_t seed, const RunOptions& options = {});

/// Recorded iterate of minimal full-gradient norm; earliest on ties.
ParamVector select_output(const OptimizerTrace& trace);
std::size_t select_output_index(const std::vector<double>& grad_norms);

enum class StationarySolver {
  /// Plain gradient ascent with eta = 1/L_f.
  kGradientAscent,
  /// Gradient ascent preconditioned by the pseudoinverse of V_S(theta),
  /// with backtracking; falls back to a plain step when no trial improves.
  kPreconditioned,
};

struct StationaryOptions {
  StationarySolver solver = StationarySolver::kPreconditioned;
  /// Starting point; empty means the origin.
  Vector init;
};

struct StationaryResult {
  ParamVector theta;
  double grad_norm = 0.0;
  std::size_t steps = 0;
  bool converged = false;
};

/// Proxy for the empirical stationary point theta*_S: ascends J_S until
/// ||grad J_S|| <= tol or max_steps is reached. Non-convergence is reported
/// through `converged`, not thrown.
StationaryResult find_stationary(const Environment& env, const Dataset& S, double tol,
                                 std::size_t max_steps, const StationaryOptions& options = {});

}  // namespace rlhflab
