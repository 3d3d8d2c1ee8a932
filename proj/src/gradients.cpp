#include "rlhf_lab/gradients.hpp"

#include <stdexcept>

#include "rlhf_lab/model.hpp"

namespace rlhflab {

namespace {

Matrix context_covariance_matrix(const Context& ctx, const Vector& theta) {
  Vector probs(ctx.num_actions());
  detail::softmax_policy(ctx, theta, probs);
  const Vector mean = ctx.features.transpose() * probs;
  Matrix v = ctx.features.transpose() * probs.asDiagonal() * ctx.features;
  v.noalias() -= mean * mean.transpose();
  return v;
}

}  // namespace

namespace detail {

void accumulate_covariance_product(const Context& ctx, const Vector& theta, const Vector& delta,
                                   double weight, Vector& out, Eigen::Ref<Vector> probs,
                                   Eigen::Ref<Vector> scratch) {
  const Eigen::Index k = ctx.num_actions();
  softmax_policy(ctx, theta, probs);
  auto p = probs.head(k);
  auto w = scratch.head(k);
  w.noalias() = ctx.features * delta;
  const double mean_proj = p.dot(w);
  w.array() = p.array() * (w.array() - mean_proj);
  out.noalias() += weight * (ctx.features.transpose() * w);
}

}  // namespace detail

CovarianceStat context_covariance(const Environment& env, const Vector& theta, std::size_t x) {
  return CovarianceStat(context_covariance_matrix(env.context(x), theta));
}

CovarianceStat empirical_covariance(const Environment& env, const Vector& theta, const Dataset& S) {
  Matrix v = Matrix::Zero(env.dim(), env.dim());
  for (std::size_t x : S) v += context_covariance_matrix(env.context(x), theta);
  v /= static_cast<double>(S.size());
  return CovarianceStat(std::move(v));
}

Vector gradient_closed_form(const Environment& env, const Vector& theta, const Dataset& S) {
  return empirical_covariance(env, theta, S).matrix() * (env.theta_star() - theta);
}

Vector gradient_score_function(const Environment& env, const Vector& theta, const Dataset& S) {
  Vector grad = Vector::Zero(env.dim());
  for (std::size_t x : S) {
    const Context& ctx = env.context(x);
    const Vector probs = policy_probs(env, theta, x);
    const Vector mean = ctx.features.transpose() * probs;
    for (Eigen::Index a = 0; a < ctx.num_actions(); ++a) {
      const double r = reward(env, x, static_cast<std::size_t>(a));
      const double advantage = r - ctx.features.row(a).dot(theta);
      // grad log pi_theta(a|x) = phi(x,a) - E_pi[phi(x,.)]
      grad += probs[a] * advantage * (ctx.features.row(a).transpose() - mean);
    }
  }
  return grad / static_cast<double>(S.size());
}

Vector stochastic_gradient(const Environment& env, const Vector& theta, std::size_t x) {
  return context_covariance_matrix(env.context(x), theta) * (env.theta_star() - theta);
}

Vector finite_difference_gradient(const Environment& env, const Vector& theta, const Dataset& S,
                                  double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  Vector grad(theta.size());
  Vector probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + step;
    const double up = empirical_objective(env, probe, S);
    probe[i] = theta[i] - step;
    const double down = empirical_objective(env, probe, S);
    probe[i] = theta[i];
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double default_fd_step(const Vector& theta) { return 1e-6 * (1.0 + theta.norm()); }

double smoothness_constant(double radius, double feature_bound) {
  if (radius < 0.0 || !(feature_bound > 0.0)) throw std::invalid_argument("smoothness constant");
  const double c = feature_bound;
  return 8.0 * radius * c * c * c + c * c;
}

double gradient_second_moment_bound(double radius, double feature_bound) {
  const double c2 = feature_bound * feature_bound;
  return 16.0 * radius * radius * c2 * c2;
}

EmpiricalObjective::EmpiricalObjective(const Environment& env, const Dataset& S)
    : env_(&env),
      dataset_(S),
      weighted_(S.weighted_contexts()),
      probs_(static_cast<Eigen::Index>(env.max_actions())),
      scratch_(static_cast<Eigen::Index>(env.max_actions())),
      delta_(env.dim()) {
  S.validate(env);
}

double EmpiricalObjective::value(const Vector& theta) {
  double sum = 0.0;
  for (const auto& [x, w] : weighted_) {
    sum += w * detail::per_prompt_objective(env_->context(x), theta, env_->theta_star(), probs_);
  }
  return sum / static_cast<double>(dataset_.size());
}

void EmpiricalObjective::gradient(const Vector& theta, Vector& out) {
  out.setZero(env_->dim());
  delta_ = env_->theta_star() - theta;
  const double inv_n = 1.0 / static_cast<double>(dataset_.size());
  for (const auto& [x, w] : weighted_) {
    detail::accumulate_covariance_product(env_->context(x), theta, delta_, w * inv_n, out, probs_,
                                          scratch_);
  }
}

Vector EmpiricalObjective::gradient(const Vector& theta) {
  Vector out;
  gradient(theta, out);
  return out;
}

void EmpiricalObjective::example_gradient(std::size_t position, const Vector& theta, Vector& out) {
  out.setZero(env_->dim());
  delta_ = env_->theta_star() - theta;
  detail::accumulate_covariance_product(env_->context(dataset_[position]), theta, delta_, 1.0, out,
                                        probs_, scratch_);
}

}  // namespace rlhflab
