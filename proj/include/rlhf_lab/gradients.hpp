#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "rlhf_lab/covariance.hpp"
#include "rlhf_lab/environment.hpp"
#include "rlhf_lab/types.hpp"

namespace rlhflab {

/// V_x(theta) = Var_{pi_theta(.|x)}[phi(x,a)].
CovarianceStat context_covariance(const Environment& env, const Vector& theta, std::size_t x);

/// V_S(theta) = (1/n) sum_i V_{x_i}(theta).
CovarianceStat empirical_covariance(const Environment& env, const Vector& theta, const Dataset& S);

/// grad J_S(theta) = V_S(theta) (theta* - theta), through the explicit matrix.
Vector gradient_closed_form(const Environment& env, const Vector& theta, const Dataset& S);

/// grad J_S through the score-function identity
///   (1/n) sum_i E_{pi_theta}[grad log pi_theta(a|x_i) (r(x_i,a) - <theta, phi(x_i,a)>)],
/// evaluated as an exact finite sum over actions.
Vector gradient_score_function(const Environment& env, const Vector& theta, const Dataset& S);

/// grad f_theta(x) = V_x(theta) (theta* - theta).
Vector stochastic_gradient(const Environment& env, const Vector& theta, std::size_t x);

/// Central differences of J_S, one coordinate at a time.
Vector finite_difference_gradient(const Environment& env, const Vector& theta, const Dataset& S,
                                  double step);

/// Default finite-difference step for a given parameter: 1e-6 * (1 + ||theta||).
double default_fd_step(const Vector& theta);

/// L_f = 8 R C^3 + C^2.
double smoothness_constant(double radius, double feature_bound);

/// Bound on E||grad f - grad J_S||^2: 16 R^2 C^4. Its square root 4 R C^2 is
/// the per-example deviation bound G.
double gradient_second_moment_bound(double radius, double feature_bound);

/// Matrix-free gradient and objective evaluation for a fixed (env, S) pair.
/// Repeated contexts are folded into weights. Holds scratch buffers, so an
/// instance must not be shared between threads.
class EmpiricalObjective {
 public:
  EmpiricalObjective(const Environment& env, const Dataset& S);

  const Environment& env() const { return *env_; }
  const Dataset& dataset() const { return dataset_; }
  std::size_t size() const { return dataset_.size(); }

  double value(const Vector& theta);
  void gradient(const Vector& theta, Vector& out);
  Vector gradient(const Vector& theta);
  /// Gradient of f_theta at the example in position `position` of S.
  void example_gradient(std::size_t position, const Vector& theta, Vector& out);

 private:
  const Environment* env_;
  Dataset dataset_;
  std::vector<std::pair<std::size_t, double>> weighted_;
  Vector probs_;
  Vector scratch_;
  Vector delta_;
};

namespace detail {

/// out += weight * V_x(theta) * delta without forming V_x.
void accumulate_covariance_product(const Context& ctx, const Vector& theta, const Vector& delta,
                                   double weight, Vector& out, Eigen::Ref<Vector> probs,
                                   Eigen::Ref<Vector> scratch);

}  // namespace detail

}  // namespace rlhflab
