#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rlhf_lab/csv.hpp"
#include "rlhf_lab/environment.hpp"
#include "rlhf_lab/rate_fit.hpp"
#include "rlhf_lab/types.hpp"

namespace rlhflab {

enum class ExperimentKind { kCoverage, kGapVsN, kGapVsT, kStability };

/// How a parameter is learned from a dataset: the stationary proxy, or GA/SGA
/// with a fixed budget.
enum class Method { kStationary, kGA, kSGA };

/// Environment family behind an experiment: the orthonormal rare-direction
/// setup, the rank-deficient subspace pool, or dense random features.
enum class EnvironmentKind { kOrthonormal, kRankDeficient, kRandom };

const char* to_string(ExperimentKind kind);
const char* to_string(Method method);
const char* to_string(EnvironmentKind kind);
std::optional<ExperimentKind> parse_experiment_kind(const std::string& text);
std::optional<Method> parse_method(const std::string& text);
std::optional<EnvironmentKind> parse_environment_kind(const std::string& text);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kCoverage;
  EnvironmentKind environment = EnvironmentKind::kOrthonormal;
  std::size_t d = 20;
  /// Only read by the rank-deficient environment.
  std::size_t d_eff = 0;
  /// Actions per context for the random environment.
  std::size_t actions = 4;
  std::vector<std::size_t> n_values;
  std::vector<double> p_values{0.02};
  /// Fixed optimizer budget; 0 selects the per-method rule (50 n^2 / 10 n^4).
  std::size_t steps = 0;
  std::size_t max_steps = 10'000'000;  // gap_vs_T horizon
  std::size_t checkpoints_per_decade = 8;
  std::size_t seeds = 20;
  std::uint64_t master_seed = 0;
  std::size_t test_set_size = 15000;
  std::size_t trials = 10000;
  std::vector<Method> methods;
  double ga_steps_factor = 50.0;
  double sga_steps_factor = 10.0;
  /// SGA full-gradient stride; 0 selects max(1, T / 10^4).
  std::size_t stride = 0;
  double stationary_tol = 1e-8;
  std::size_t stationary_max_steps = 100000;
  /// Pool contexts reserved for training draws (after the test block).
  std::size_t train_reserve = 1000;

  /// Throws std::invalid_argument naming the violated constraint.
  void validate() const;
};

/// Kind-specific defaults (dimensions, sweep grid, methods).
ExperimentConfig default_config(ExperimentKind kind);

/// An environment with its fixed test set and its law for training draws.
struct ExperimentInstance {
  Environment env;
  Dataset test_set;
  /// Training draws come uniformly from this index block; empty means the
  /// environment's own sampler.
  std::vector<std::size_t> train_pool;

  std::size_t draw_train(Rng& rng) const;
  Dataset draw_dataset(std::size_t n, Rng& rng) const;
};

/// Builds config.environment. Pool environments put the test set at
/// [0, test_set_size) and draw training examples from the next train_reserve
/// contexts; the orthonormal setup samples training contexts from its own law.
ExperimentInstance make_instance(const ExperimentConfig& config, std::uint64_t seed);

struct TrainResult {
  Vector theta;
  double grad_norm = 0.0;
  bool converged = true;
  std::size_t steps = 0;
};

/// Learns a parameter with `method` from the origin.
TrainResult train(const Environment& env, const Dataset& S, Method method,
                  const ExperimentConfig& config, std::uint64_t seed);

/// Step budget for GA / SGA at sample size n: config.steps if set, otherwise
/// ga_steps_factor * n^2 or sga_steps_factor * n^4.
std::size_t step_budget(Method method, std::size_t n, const ExperimentConfig& config);

/// 10^1 .. max_steps with `per_decade` geometric points per decade.
std::vector<std::size_t> checkpoint_grid(std::size_t max_steps, std::size_t per_decade);

struct SweepPoint {
  double key = 0.0;
  std::vector<double> values;  // one per seed, in seed order
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

struct Series {
  std::string label;
  std::vector<SweepPoint> points;

  std::vector<double> keys() const;
  std::vector<double> medians() const;
};

struct ExperimentReport {
  ExperimentKind kind = ExperimentKind::kCoverage;
  /// report.csv
  Table raw;
  /// plotdata_<name>.csv
  std::vector<std::pair<std::string, Table>> plotdata;
  std::vector<Series> series;
  std::vector<std::pair<std::string, LinearFit>> fits;
  /// Scalar facts about the run (controls, convergence counts).
  std::vector<std::pair<std::string, std::string>> notes;

  const Series& find_series(const std::string& label) const;
};

SweepPoint summarize(double key, std::vector<double> values);

ExperimentReport sweep_coverage(const ExperimentConfig& config, std::size_t jobs = 1);
ExperimentReport sweep_gap_vs_n(const ExperimentConfig& config, std::size_t jobs = 1);
ExperimentReport sweep_gap_vs_T(const ExperimentConfig& config, std::size_t jobs = 1);
ExperimentReport sweep_stability(const ExperimentConfig& config, std::size_t jobs = 1);
ExperimentReport run_experiment(const ExperimentConfig& config, std::size_t jobs = 1);

/// Maps a dataset and a run seed to a learned parameter.
using Trainer = std::function<Vector(const Dataset&, std::uint64_t)>;

/// max over the test set of |f_{theta_S}(x) - f_{theta_S'}(x)|.
double stability_pair_value(const ExperimentInstance& instance, const Dataset& S,
                            const Dataset& S_prime, const Trainer& trainer, std::uint64_t seed);

struct StabilityEstimate {
  std::vector<double> pair_values;
  double max = 0.0;     // the stability estimate
  double median = 0.0;
};

/// For each of `pairs` draws: sample S of size n, replace one uniformly chosen
/// example by a fresh draw, train both datasets with a shared run seed, and
/// record stability_pair_value. Pair k uses stream mix64(master_seed, k).
StabilityEstimate estimate_stability(const ExperimentInstance& instance, std::size_t n,
                                     std::size_t pairs, const Trainer& trainer,
                                     std::uint64_t master_seed, std::size_t jobs = 1);

}  // namespace rlhflab
