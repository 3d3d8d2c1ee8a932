#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rlhf_lab/environment.hpp"

namespace rlhflab {

/// Context-sampling weights of the orthonormal-basis environment: the last
/// basis direction has mass p, the remaining d-1 share 1-p uniformly.
std::vector<double> orthonormal_sampler_weights(std::size_t d, double p);

/// Orthonormal-basis environment: contexts are e_1..e_d, each with the two
/// actions phi = +x and phi = -x under a uniform reference; theta* uniform in
/// the unit ball; C = D = 1. Throws std::invalid_argument for d < 2 or p
/// outside (0, 1).
Environment gen_env_orthonormal(std::size_t d, double p, std::uint64_t seed);

/// min over ||theta|| <= 1 of sigma_min(E_x[V_x(theta)]) for the orthonormal
/// environment: min(p, (1-p)/(d-1)) * 4 / (e + 1/e)^2.
double orthonormal_min_population_eigenvalue(std::size_t d, double p);

/// Pool-based environment whose features live in a d_eff-dimensional subspace.
struct RankDeficientEnvironment {
  Environment env;
  /// d x d_eff orthonormal basis a_1..a_{d_eff} of the effective subspace.
  Matrix subspace_basis;
};

/// Each pool context is a unit-normalized Gaussian x with two distinct
/// subspace indices u != v; its actions have features a_u a_u^T x and
/// a_v a_v^T x. Draws whose subspace projection has norm < 1e-6 (or whose
/// two features are degenerate) are redrawn. theta* is a unit vector inside
/// the subspace; the reference is uniform; C = D = 1.
RankDeficientEnvironment gen_env_rank_deficient(std::size_t d, std::size_t d_eff,
                                                std::size_t pool_size, std::uint64_t seed);

/// Small random environment for property checks: `num_contexts` contexts with
/// `num_actions` Gaussian features each (norms in [0.2, 1]), random positive
/// reference probabilities, theta* uniform in the unit ball; C = D = 1.
Environment gen_env_random(std::size_t d, std::size_t num_actions, std::size_t num_contexts,
                           std::uint64_t seed);

}  // namespace rlhflab
