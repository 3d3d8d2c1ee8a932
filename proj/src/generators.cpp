#include "rlhf_lab/generators.hpp"

#include <cmath>
#include <stdexcept>

#include "rlhf_lab/rng.hpp"

namespace rlhflab {

namespace {

Vector gaussian_vector(Eigen::Index d, Rng& rng) {
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = rng.normal();
  return v;
}

/// Uniform draw from the unit ball in R^d.
Vector uniform_in_ball(Eigen::Index d, Rng& rng) {
  Vector dir;
  do {
    dir = gaussian_vector(d, rng);
  } while (dir.norm() == 0.0);
  dir.normalize();
  const double radius = std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
  return radius * dir;
}

}  // namespace

std::vector<double> orthonormal_sampler_weights(std::size_t d, double p) {
  if (d < 2) throw std::invalid_argument("orthonormal environment needs d >= 2");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("rare-direction probability must lie in (0,1)");
  std::vector<double> w(d, (1.0 - p) / static_cast<double>(d - 1));
  w.back() = p;
  return w;
}

Environment gen_env_orthonormal(std::size_t d, double p, std::uint64_t seed) {
  std::vector<double> weights = orthonormal_sampler_weights(d, p);
  const auto dim = static_cast<Eigen::Index>(d);
  std::vector<Context> contexts;
  contexts.reserve(d);
  for (Eigen::Index i = 0; i < dim; ++i) {
    Matrix features = Matrix::Zero(2, dim);
    features(0, i) = 1.0;
    features(1, i) = -1.0;
    contexts.push_back(make_uniform_context(std::move(features)));
  }
  Rng rng(seed);
  Vector theta_star = uniform_in_ball(dim, rng);
  return Environment(std::move(contexts), std::move(theta_star), 1.0, 1.0, std::move(weights));
}

double orthonormal_min_population_eigenvalue(std::size_t d, double p) {
  const std::vector<double> w = orthonormal_sampler_weights(d, p);
  const double smallest = std::min(w.front(), w.back());
  const double cosh_sum = std::exp(1.0) + std::exp(-1.0);
  return smallest * 4.0 / (cosh_sum * cosh_sum);
}

RankDeficientEnvironment gen_env_rank_deficient(std::size_t d, std::size_t d_eff,
                                                std::size_t pool_size, std::uint64_t seed) {
  if (d_eff < 2 || d_eff > d) throw std::invalid_argument("need 2 <= d_eff <= d");
  if (pool_size < 1) throw std::invalid_argument("pool must contain at least one context");
  const auto dim = static_cast<Eigen::Index>(d);
  const auto eff = static_cast<Eigen::Index>(d_eff);
  Rng rng(seed);

  Matrix gaussian(dim, eff);
  for (Eigen::Index j = 0; j < eff; ++j) gaussian.col(j) = gaussian_vector(dim, rng);
  Eigen::HouseholderQR<Matrix> qr(gaussian);
  Matrix basis = qr.householderQ() * Matrix::Identity(dim, eff);

  Vector coeffs;
  do {
    coeffs = gaussian_vector(eff, rng);
  } while (coeffs.norm() == 0.0);
  Vector theta_star = basis * coeffs.normalized();

  std::vector<Context> contexts;
  contexts.reserve(pool_size);
  while (contexts.size() < pool_size) {
    Vector x = gaussian_vector(dim, rng);
    const double norm = x.norm();
    if (norm == 0.0) continue;
    x /= norm;
    const std::size_t u = rng.index(d_eff);
    std::size_t v = rng.index(d_eff - 1);
    if (v >= u) ++v;
    const Vector projection = basis.transpose() * x;
    const double cu = projection[static_cast<Eigen::Index>(u)];
    const double cv = projection[static_cast<Eigen::Index>(v)];
    if (projection.norm() < 1e-6 || std::abs(cu) < 1e-12 || std::abs(cv) < 1e-12) continue;
    Matrix features(2, dim);
    features.row(0) = cu * basis.col(static_cast<Eigen::Index>(u)).transpose();
    features.row(1) = cv * basis.col(static_cast<Eigen::Index>(v)).transpose();
    contexts.push_back(make_uniform_context(std::move(features)));
  }
  Environment env(std::move(contexts), std::move(theta_star), 1.0, 1.0);
  return {std::move(env), std::move(basis)};
}

Environment gen_env_random(std::size_t d, std::size_t num_actions, std::size_t num_contexts,
                           std::uint64_t seed) {
  if (d < 1 || num_actions < 1 || num_contexts < 1) throw std::invalid_argument("empty random environment");
  const auto dim = static_cast<Eigen::Index>(d);
  const auto k = static_cast<Eigen::Index>(num_actions);
  Rng rng(seed);
  std::vector<Context> contexts;
  contexts.reserve(num_contexts);
  for (std::size_t c = 0; c < num_contexts; ++c) {
    Matrix features(k, dim);
    for (Eigen::Index a = 0; a < k; ++a) {
      Vector phi;
      do {
        phi = gaussian_vector(dim, rng);
      } while (phi.norm() == 0.0);
      features.row(a) = (0.2 + 0.8 * rng.uniform()) * phi.normalized().transpose();
    }
    Vector ref(k);
    for (Eigen::Index a = 0; a < k; ++a) ref[a] = 0.1 + rng.uniform();
    ref /= ref.sum();
    contexts.emplace_back(std::move(features), std::move(ref));
  }
  Vector theta_star = uniform_in_ball(dim, rng);
  return Environment(std::move(contexts), std::move(theta_star), 1.0, 1.0);
}

}  // namespace rlhflab
