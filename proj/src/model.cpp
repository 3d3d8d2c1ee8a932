#include "rlhf_lab/model.hpp"

#include <cmath>
#include <stdexcept>

namespace rlhflab {

namespace detail {

double softmax_policy(const Context& ctx, const Vector& theta, Eigen::Ref<Vector> probs) {
  const Eigen::Index k = ctx.num_actions();
  auto p = probs.head(k);
  p.noalias() = ctx.features * theta;
  p += ctx.log_ref;
  const double shift = p.maxCoeff();
  p.array() = (p.array() - shift).exp();
  const double z = p.sum();
  p /= z;
  return shift + std::log(z);
}

double per_prompt_objective(const Context& ctx, const Vector& theta, const Vector& theta_star,
                            Eigen::Ref<Vector> probs) {
  const Eigen::Index k = ctx.num_actions();
  const double log_partition = softmax_policy(ctx, theta, probs);
  double expected_reward = 0.0;
  double kl = 0.0;
  for (Eigen::Index a = 0; a < k; ++a) {
    const double pa = probs[a];
    const double score = ctx.features.row(a).dot(theta);
    expected_reward += pa * ctx.features.row(a).dot(theta_star);
    // log(pi/pi_ref) = <theta, phi> - log Z
    kl += pa * (score - log_partition);
  }
  return expected_reward - kKlWeight * kl;
}

}  // namespace detail

Vector policy_probs(const Environment& env, const Vector& theta, std::size_t x) {
  const Context& ctx = env.context(x);
  Vector probs(ctx.num_actions());
  detail::softmax_policy(ctx, theta, probs);
  return probs;
}

double reward(const Environment& env, std::size_t x, std::size_t a) {
  const Context& ctx = env.context(x);
  if (a >= static_cast<std::size_t>(ctx.num_actions())) throw std::out_of_range("action index");
  return ctx.features.row(static_cast<Eigen::Index>(a)).dot(env.theta_star());
}

double kl_to_ref(const Environment& env, const Vector& theta, std::size_t x) {
  const Context& ctx = env.context(x);
  Vector probs(ctx.num_actions());
  const double log_partition = detail::softmax_policy(ctx, theta, probs);
  double kl = 0.0;
  for (Eigen::Index a = 0; a < ctx.num_actions(); ++a) {
    const double log_ratio = ctx.features.row(a).dot(theta) - log_partition;
    kl += probs[a] * log_ratio;
  }
  return kl;
}

double per_prompt_objective(const Environment& env, const Vector& theta, std::size_t x) {
  const Context& ctx = env.context(x);
  Vector probs(ctx.num_actions());
  return detail::per_prompt_objective(ctx, theta, env.theta_star(), probs);
}

double empirical_objective(const Environment& env, const Vector& theta, const Dataset& S) {
  Vector probs(static_cast<Eigen::Index>(env.max_actions()));
  double sum = 0.0;
  for (std::size_t x : S) sum += detail::per_prompt_objective(env.context(x), theta, env.theta_star(), probs);
  return sum / static_cast<double>(S.size());
}

ObjectiveEstimate population_estimate(const Environment& env, const Vector& theta,
                                      const Dataset& test_set) {
  Vector probs(static_cast<Eigen::Index>(env.max_actions()));
  const double n = static_cast<double>(test_set.size());
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t x : test_set) {
    const double f = detail::per_prompt_objective(env.context(x), theta, env.theta_star(), probs);
    sum += f;
    sum_sq += f * f;
  }
  ObjectiveEstimate est;
  est.mean = sum / n;
  if (test_set.size() > 1) {
    const double var = std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0));
    est.standard_error = std::sqrt(var / n);
  }
  return est;
}

double population_objective(const Environment& env, const Vector& theta, const Dataset& test_set) {
  return empirical_objective(env, theta, test_set);
}

double suboptimality_gap(const Environment& env, const Vector& theta, const Dataset& test_set) {
  return std::abs(population_objective(env, env.theta_star(), test_set) -
                  population_objective(env, theta, test_set));
}

double suboptimality_gap_standard_error(const Environment& env, const Vector& theta,
                                        const Dataset& test_set) {
  Vector probs(static_cast<Eigen::Index>(env.max_actions()));
  const double n = static_cast<double>(test_set.size());
  if (test_set.size() < 2) return 0.0;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t x : test_set) {
    const Context& ctx = env.context(x);
    const double diff = detail::per_prompt_objective(ctx, env.theta_star(), env.theta_star(), probs) -
                        detail::per_prompt_objective(ctx, theta, env.theta_star(), probs);
    sum += diff;
    sum_sq += diff * diff;
  }
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return std::sqrt(var / n);
}

SuboptimalityDecomposition decompose_suboptimality(const Environment& env,
                                                   const Vector& theta_learned,
                                                   const Vector& theta_stat, const Dataset& S,
                                                   const Dataset& test_set) {
  const double pop_star = population_objective(env, env.theta_star(), test_set);
  const double pop_learned = population_objective(env, theta_learned, test_set);
  const double emp_stat = empirical_objective(env, theta_stat, S);
  const double emp_learned = empirical_objective(env, theta_learned, S);
  SuboptimalityDecomposition out;
  out.concentration = std::abs(pop_star - emp_stat);
  out.optimization = std::abs(emp_stat - emp_learned);
  out.generalization = std::abs(emp_learned - pop_learned);
  out.gap = std::abs(pop_star - pop_learned);
  return out;
}

}  // namespace rlhflab
