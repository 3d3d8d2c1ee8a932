#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rlhf_lab/rng.hpp"
#include "rlhf_lab/types.hpp"

namespace rlhflab {

/// One prompt x: the feature vectors of its actions (one row per action) and
/// the reference policy over those actions.
struct Context {
  Matrix features;  // |A_x| x d
  Vector ref_probs;
  Vector log_ref;

  Context() = default;
  Context(Matrix features_in, Vector ref_probs_in);

  Eigen::Index num_actions() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

/// Uniform reference over `features.rows()` actions.
Context make_uniform_context(Matrix features);

/// Finite context pool with a reference policy, ground-truth parameter and a
/// sampling law over contexts. Construction validates the boundedness and
/// normalization invariants and throws std::invalid_argument on violation.
class Environment {
 public:
  Environment(std::vector<Context> contexts, Vector theta_star, double feature_bound,
              double param_bound, std::vector<double> sampler_weights);

  /// Uniform sampler over all contexts.
  Environment(std::vector<Context> contexts, Vector theta_star, double feature_bound,
              double param_bound);

  Eigen::Index dim() const { return theta_star_.size(); }
  std::size_t num_contexts() const { return contexts_.size(); }
  const Context& context(std::size_t x) const;
  const std::vector<Context>& contexts() const { return contexts_; }

  const Vector& theta_star() const { return theta_star_; }
  double feature_bound() const { return feature_bound_; }
  double param_bound() const { return param_bound_; }
  /// Radius of the region containing all stationary points and iterates (3D).
  double radius() const { return 3.0 * param_bound_; }
  std::size_t max_actions() const { return max_actions_; }

  const std::vector<double>& sampler_weights() const { return weights_; }
  std::size_t sample_context(Rng& rng) const { return rng.categorical(cumulative_); }

  /// Copy with a different ground truth (used for reward rescaling).
  Environment with_theta_star(Vector theta_star, double param_bound) const;

  /// Whether every context has linearly independent action features.
  bool features_linearly_independent(double tol = 1e-10) const;

 private:
  std::vector<Context> contexts_;
  Vector theta_star_;
  double feature_bound_;
  double param_bound_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
  std::size_t max_actions_ = 0;
};

/// The prompt sample S: an ordered multiset of context indices.
class Dataset {
 public:
  explicit Dataset(std::vector<std::size_t> indices);

  static Dataset sample(const Environment& env, std::size_t n, Rng& rng);

  std::size_t size() const { return indices_.size(); }
  std::size_t operator[](std::size_t i) const { return indices_[i]; }
  const std::vector<std::size_t>& indices() const { return indices_; }
  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

  /// Neighbouring dataset with example `position` replaced by `context`.
  Dataset with_replacement(std::size_t position, std::size_t context) const;

  /// Throws std::out_of_range if any index is not a context of `env`.
  void validate(const Environment& env) const;

  /// Distinct contexts with their multiplicities, in first-occurrence order.
  std::vector<std::pair<std::size_t, double>> weighted_contexts() const;

 private:
  std::vector<std::size_t> indices_;
};

}  // namespace rlhflab
