#include "rlhf_lab/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace rlhflab {

Context::Context(Matrix features_in, Vector ref_probs_in)
    : features(std::move(features_in)), ref_probs(std::move(ref_probs_in)) {
  if (features.rows() < 1) throw std::invalid_argument("context needs at least one action");
  if (ref_probs.size() != features.rows()) {
    throw std::invalid_argument("reference probabilities do not match action count");
  }
  log_ref = ref_probs.array().log().matrix();
}

Context make_uniform_context(Matrix features) {
  const auto k = features.rows();
  return Context(std::move(features), Vector::Constant(k, 1.0 / static_cast<double>(k)));
}

Environment::Environment(std::vector<Context> contexts, Vector theta_star, double feature_bound,
                         double param_bound, std::vector<double> sampler_weights)
    : contexts_(std::move(contexts)),
      theta_star_(std::move(theta_star)),
      feature_bound_(feature_bound),
      param_bound_(param_bound),
      weights_(std::move(sampler_weights)) {
  if (contexts_.empty()) throw std::invalid_argument("environment has no contexts");
  if (!(feature_bound_ > 0.0) || !(param_bound_ > 0.0)) {
    throw std::invalid_argument("feature and parameter bounds must be positive");
  }
  if (theta_star_.norm() > param_bound_ + 1e-12) {
    throw std::invalid_argument("||theta*|| exceeds the parameter bound");
  }
  if (weights_.size() != contexts_.size()) {
    throw std::invalid_argument("sampler weights do not match context count");
  }
  for (std::size_t x = 0; x < contexts_.size(); ++x) {
    const Context& ctx = contexts_[x];
    const std::string where = "context " + std::to_string(x);
    if (ctx.dim() != theta_star_.size()) throw std::invalid_argument(where + ": dimension mismatch");
    if ((ctx.ref_probs.array() <= 0.0).any()) {
      throw std::invalid_argument(where + ": reference probabilities must be positive");
    }
    if (std::abs(ctx.ref_probs.sum() - 1.0) > 1e-12) {
      throw std::invalid_argument(where + ": reference probabilities must sum to 1");
    }
    if (ctx.features.rowwise().norm().maxCoeff() > feature_bound_ + 1e-12) {
      throw std::invalid_argument(where + ": feature norm exceeds the feature bound");
    }
    max_actions_ = std::max(max_actions_, static_cast<std::size_t>(ctx.num_actions()));
  }
  cumulative_.resize(weights_.size());
  double total = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (!(weights_[i] >= 0.0)) throw std::invalid_argument("sampler weights must be nonnegative");
    total += weights_[i];
    cumulative_[i] = total;
  }
  if (!(total > 0.0)) throw std::invalid_argument("sampler weights have zero mass");
}

Environment::Environment(std::vector<Context> contexts, Vector theta_star, double feature_bound,
                         double param_bound)
    : Environment(contexts, std::move(theta_star), feature_bound, param_bound,
                  std::vector<double>(contexts.size(), 1.0)) {}

const Context& Environment::context(std::size_t x) const {
  if (x >= contexts_.size()) throw std::out_of_range("context index " + std::to_string(x));
  return contexts_[x];
}

Environment Environment::with_theta_star(Vector theta_star, double param_bound) const {
  return Environment(contexts_, std::move(theta_star), feature_bound_, param_bound, weights_);
}

bool Environment::features_linearly_independent(double tol) const {
  for (const Context& ctx : contexts_) {
    if (ctx.num_actions() > ctx.dim()) return false;
    Eigen::ColPivHouseholderQR<Matrix> qr(ctx.features.transpose());
    qr.setThreshold(tol);
    if (qr.rank() != ctx.num_actions()) return false;
  }
  return true;
}

Dataset::Dataset(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
  if (indices_.empty()) throw std::invalid_argument("dataset must contain at least one example");
}

Dataset Dataset::sample(const Environment& env, std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = env.sample_context(rng);
  return Dataset(std::move(idx));
}

Dataset Dataset::with_replacement(std::size_t position, std::size_t context) const {
  if (position >= indices_.size()) throw std::out_of_range("replacement position");
  auto copy = indices_;
  copy[position] = context;
  return Dataset(std::move(copy));
}

void Dataset::validate(const Environment& env) const {
  for (std::size_t i : indices_) {
    if (i >= env.num_contexts()) throw std::out_of_range("dataset index " + std::to_string(i));
  }
}

std::vector<std::pair<std::size_t, double>> Dataset::weighted_contexts() const {
  std::vector<std::pair<std::size_t, double>> out;
  std::unordered_map<std::size_t, std::size_t> slot;
  for (std::size_t i : indices_) {
    auto [it, inserted] = slot.try_emplace(i, out.size());
    if (inserted) {
      out.emplace_back(i, 1.0);
    } else {
      out[it->second].second += 1.0;
    }
  }
  return out;
}

}  // namespace rlhflab
