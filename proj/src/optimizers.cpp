#include "rlhf_lab/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rlhf_lab/gradients.hpp"
#include "rlhf_lab/model.hpp"

namespace rlhflab {

const char* to_string(OptimizerKind kind) { return kind == OptimizerKind::kGA ? "GA" : "SGA"; }

double Schedule::step_at(std::size_t t) const {
  if (kind == OptimizerKind::kGA) return base_step;
  return base_step / std::sqrt(static_cast<double>(t));
}

namespace {

std::vector<std::size_t> geometric_grid(std::size_t last, std::size_t max_points) {
  std::vector<std::size_t> grid;
  if (max_points == 0) return grid;
  if (last <= max_points) {
    grid.resize(last);
    for (std::size_t i = 0; i < last; ++i) grid[i] = i + 1;
    return grid;
  }
  const double log_last = std::log(static_cast<double>(last));
  for (std::size_t i = 0; i < max_points; ++i) {
    const double frac = max_points == 1 ? 1.0 : static_cast<double>(i) / static_cast<double>(max_points - 1);
    const auto v = static_cast<std::size_t>(std::llround(std::exp(log_last * frac)));
    if (grid.empty() || v > grid.back()) grid.push_back(std::min(v, last));
  }
  if (grid.back() != last) grid.push_back(last);
  return grid;
}

/// Walks a sorted list of iterate numbers alongside the optimizer loop.
class Cursor {
 public:
  explicit Cursor(const std::vector<std::size_t>& sorted) : items_(sorted) {}
  bool hit(std::size_t t) {
    while (pos_ < items_.size() && items_[pos_] < t) ++pos_;
    return pos_ < items_.size() && items_[pos_] == t;
  }

 private:
  const std::vector<std::size_t>& items_;
  std::size_t pos_ = 0;
};

void check_config(const Environment& env, const Dataset& S, const Vector& theta_init,
                  std::size_t steps) {
  if (steps == 0) throw std::invalid_argument("optimizer needs T >= 1");
  if (theta_init.size() != env.dim()) throw std::invalid_argument("initial parameter has wrong dimension");
  if (theta_init.norm() > env.param_bound() + 1e-12) {
    throw std::invalid_argument("initial parameter lies outside the D-ball");
  }
  S.validate(env);
}

OptimizerTrace run_optimizer(const Environment& env, const Dataset& S, const Vector& theta_init,
                             const Schedule& schedule, const RunOptions& options) {
  const std::size_t T = schedule.steps;
  const double radius = env.radius();
  const double iterate_limit = radius + 1e-10;

  OptimizerTrace trace;
  trace.schedule = schedule;

  EmpiricalObjective objective(env, S);
  const std::vector<std::size_t> record_grid = geometric_grid(T + 1, options.max_recorded);
  std::vector<std::size_t> checkpoints = options.checkpoints;
  std::sort(checkpoints.begin(), checkpoints.end());
  Cursor record_cursor(record_grid);
  Cursor checkpoint_cursor(checkpoints);

  Rng rng(schedule.seed);
  Vector theta = theta_init;
  Vector full_grad(env.dim());
  Vector example_grad(env.dim());

  Vector best = theta;
  std::size_t best_step = 0;
  double best_norm = std::numeric_limits<double>::infinity();
  double min_norm_sq_first_T = std::numeric_limits<double>::infinity();

  const bool is_ga = schedule.kind == OptimizerKind::kGA;
  const std::size_t stride = std::max<std::size_t>(1, schedule.stride);

  auto visit = [&](std::size_t t) {
    const bool recorded = record_cursor.hit(t);
    const bool checkpoint = checkpoint_cursor.hit(t);
    const bool evaluate = is_ga || recorded || checkpoint || t == T + 1 || (t - 1) % stride == 0;
    if (!evaluate) return;
    objective.gradient(theta, full_grad);
    ++trace.evaluations;
    const double norm = full_grad.norm();
    if (t <= T) min_norm_sq_first_T = std::min(min_norm_sq_first_T, norm * norm);
    if (norm < best_norm) {
      best_norm = norm;
      best = theta;
      best_step = t;
    }
    if (recorded) {
      trace.steps.push_back(t);
      trace.iterates.emplace_back(theta, radius);
      trace.grad_norms.push_back(norm);
    }
    if (checkpoint && options.on_checkpoint) options.on_checkpoint(t, ParamVector(best, radius), best_norm);
  };

  auto check_norm = [&](std::size_t t) {
    const double norm = theta.norm();
    trace.max_iterate_norm = std::max(trace.max_iterate_norm, norm);
    if (norm > iterate_limit || !std::isfinite(norm)) {
      trace.iterates_bounded = false;
      if (options.enforce_invariants) {
        std::ostringstream msg;
        msg << to_string(schedule.kind) << " iterate " << t << " left the 3D ball: ||theta|| = " << norm;
        throw InvariantViolation(msg.str());
      }
    }
  };

  check_norm(1);
  for (std::size_t t = 1; t <= T; ++t) {
    visit(t);
    if (is_ga) {
      theta.noalias() += schedule.base_step * full_grad;
    } else {
      const std::size_t i = rng.index(objective.size());
      objective.example_gradient(i, theta, example_grad);
      theta.noalias() += schedule.step_at(t) * example_grad;
    }
    check_norm(t + 1);
  }
  visit(T + 1);
  trace.final_iterate = ParamVector(theta, radius);

  // The selected iterate always appears in the recorded list.
  const auto pos = std::lower_bound(trace.steps.begin(), trace.steps.end(), best_step);
  const auto index = static_cast<std::size_t>(pos - trace.steps.begin());
  if (pos == trace.steps.end() || *pos != best_step) {
    trace.steps.insert(pos, best_step);
    trace.iterates.insert(trace.iterates.begin() + static_cast<std::ptrdiff_t>(index), ParamVector(best, radius));
    trace.grad_norms.insert(trace.grad_norms.begin() + static_cast<std::ptrdiff_t>(index), best_norm);
  }
  trace.selected_index = index;

  if (is_ga) {
    const double L = smoothness_constant(radius, env.feature_bound());
    trace.ga_bound = 12.0 * L * radius * env.feature_bound() / static_cast<double>(T);
    trace.ga_bound_holds = min_norm_sq_first_T <= trace.ga_bound + 1e-9;
    if (!trace.ga_bound_holds && options.enforce_invariants) {
      std::ostringstream msg;
      msg << "GA gradient bound violated: min ||grad||^2 = " << min_norm_sq_first_T
          << " > " << trace.ga_bound;
      throw InvariantViolation(msg.str());
    }
  }
  return trace;
}

}  // namespace

OptimizerTrace run_ga(const Environment& env, const Dataset& S, const Vector& theta_init,
                      std::size_t steps, const RunOptions& options) {
  check_config(env, S, theta_init, steps);
  Schedule schedule;
  schedule.kind = OptimizerKind::kGA;
  schedule.base_step = 1.0 / smoothness_constant(env.radius(), env.feature_bound());
  schedule.steps = steps;
  schedule.stride = 1;
  return run_optimizer(env, S, theta_init, schedule, options);
}

OptimizerTrace run_sga(const Environment& env, const Dataset& S, const Vector& theta_init,
                       std::size_t steps, std::uint64_t seed, const RunOptions& options) {
  check_config(env, S, theta_init, steps);
  Schedule schedule;
  schedule.kind = OptimizerKind::kSGA;
  schedule.base_step = 1.0 / (2.0 * smoothness_constant(env.radius(), env.feature_bound()));
  schedule.steps = steps;
  schedule.seed = seed;
  schedule.stride = options.stride > 0 ? options.stride : std::max<std::size_t>(1, steps / 10000);
  return run_optimizer(env, S, theta_init, schedule, options);
}

std::size_t select_output_index(const std::vector<double>& grad_norms) {
  if (grad_norms.empty()) throw std::invalid_argument("cannot select from an empty trace");
  std::size_t best = 0;
  for (std::size_t i = 1; i < grad_norms.size(); ++i) {
    if (grad_norms[i] < grad_norms[best]) best = i;
  }
  return best;
}

ParamVector select_output(const OptimizerTrace& trace) {
  return trace.iterates.at(select_output_index(trace.grad_norms));
}

StationaryResult find_stationary(const Environment& env, const Dataset& S, double tol,
                                 std::size_t max_steps, const StationaryOptions& options) {
  if (!(tol > 0.0)) throw std::invalid_argument("stationary tolerance must be positive");
  const double radius = env.radius();
  const double eta = 1.0 / smoothness_constant(radius, env.feature_bound());
  EmpiricalObjective objective(env, S);

  Vector theta = options.init.size() ? options.init : Vector::Zero(env.dim());
  if (theta.size() != env.dim()) throw std::invalid_argument("initial parameter has wrong dimension");
  Vector grad = objective.gradient(theta);
  double grad_norm = grad.norm();
  double value = options.solver == StationarySolver::kPreconditioned ? objective.value(theta) : 0.0;

  StationaryResult result;
  std::size_t step = 0;
  while (grad_norm > tol && step < max_steps) {
    ++step;
    if (options.solver == StationarySolver::kGradientAscent) {
      theta.noalias() += eta * grad;
      objective.gradient(theta, grad);
      grad_norm = grad.norm();
      continue;
    }
    const CovarianceStat cov = empirical_covariance(env, theta, S);
    const Vector direction = cov.pseudo_inverse() * grad;
    bool accepted = false;
    double alpha = 1.0;
    for (int trial = 0; trial < 40 && !accepted; ++trial, alpha *= 0.5) {
      Vector candidate = theta + alpha * direction;
      if (candidate.norm() > radius) continue;
      const double cand_value = objective.value(candidate);
      Vector cand_grad = objective.gradient(candidate);
      const double cand_norm = cand_grad.norm();
      if (cand_value > value || cand_norm < grad_norm) {
        theta = std::move(candidate);
        grad = std::move(cand_grad);
        grad_norm = cand_norm;
        value = cand_value;
        accepted = true;
      }
    }
    if (!accepted) {
      theta.noalias() += eta * grad;
      objective.gradient(theta, grad);
      grad_norm = grad.norm();
      value = objective.value(theta);
    }
  }
  result.theta = ParamVector(theta, radius);
  result.grad_norm = grad_norm;
  result.steps = step;
  result.converged = grad_norm <= tol;
  return result;
}

}  // namespace rlhflab
