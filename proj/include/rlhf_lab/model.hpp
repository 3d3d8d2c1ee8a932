#pragma once

#include <cstddef>

#include "rlhf_lab/environment.hpp"
#include "rlhf_lab/types.hpp"

namespace rlhflab {

/// pi_theta(.|x) proportional to pi_ref(.|x) * exp(<theta, phi(x,.)>), computed
/// with max-subtracted exponentials.
Vector policy_probs(const Environment& env, const Vector& theta, std::size_t x);

/// Linear ground-truth reward <theta*, phi(x,a)>.
double reward(const Environment& env, std::size_t x, std::size_t a);

/// KL(pi_theta(.|x) || pi_ref(.|x)).
double kl_to_ref(const Environment& env, const Vector& theta, std::size_t x);

/// f_theta(x) = E_{pi_theta}[r(x,a)] - KL(pi_theta || pi_ref).
double per_prompt_objective(const Environment& env, const Vector& theta, std::size_t x);

/// J_S: mean of f_theta over the dataset.
double empirical_objective(const Environment& env, const Vector& theta, const Dataset& S);

struct ObjectiveEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Monte Carlo estimate of the population objective over a fixed test set,
/// with the standard error of the mean.
ObjectiveEstimate population_estimate(const Environment& env, const Vector& theta,
                                      const Dataset& test_set);

/// Population objective estimated on a fixed test set (mean only).
double population_objective(const Environment& env, const Vector& theta, const Dataset& test_set);

/// |J_test(pi_{theta*}) - J_test(pi_theta)|.
double suboptimality_gap(const Environment& env, const Vector& theta, const Dataset& test_set);

/// Standard error of the per-context difference f_{theta*} - f_theta on the
/// test set; the noise scale of suboptimality_gap.
double suboptimality_gap_standard_error(const Environment& env, const Vector& theta,
                                        const Dataset& test_set);

struct SuboptimalityDecomposition {
  double concentration = 0.0;   // |J(theta*) - J_S(theta_stat)|
  double optimization = 0.0;    // |J_S(theta_stat) - J_S(theta_learned)|
  double generalization = 0.0;  // |J_S(theta_learned) - J(theta_learned)|
  double gap = 0.0;             // |J(theta*) - J(theta_learned)|

  double total() const { return concentration + optimization + generalization; }
};

/// Splits the suboptimality of `theta_learned` into concentration,
/// optimization and generalization terms. `theta_stat` stands in for the
/// empirical stationary point; population terms are estimated on `test_set`.
SuboptimalityDecomposition decompose_suboptimality(const Environment& env,
                                                   const Vector& theta_learned,
                                                   const Vector& theta_stat, const Dataset& S,
                                                   const Dataset& test_set);

namespace detail {

/// Writes pi_theta(.|x) into probs.head(|A_x|) and returns the log partition
/// log sum_a pi_ref(a|x) exp(<theta, phi(x,a)>).
double softmax_policy(const Context& ctx, const Vector& theta, Eigen::Ref<Vector> probs);

/// f_theta(x) using `probs` as scratch of length >= |A_x|.
double per_prompt_objective(const Context& ctx, const Vector& theta, const Vector& theta_star,
                            Eigen::Ref<Vector> probs);

}  // namespace detail

}  // namespace rlhflab
