#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace rlhflab {

/// Exact probability that n i.i.d. draws from `weights` (normalized) hit every
/// category, by inclusion-exclusion over the missed subsets. Cost 2^|weights|;
/// throws std::invalid_argument above 20 categories.
double exact_coverage_probability(std::span<const double> weights, std::size_t n);

/// The same for the orthonormal-basis sampler. Restricted to d <= 12; larger
/// d throws std::invalid_argument (use the Monte Carlo estimate).
double exact_coverage_probability(std::size_t d, double p, std::size_t n);

struct CoverageEstimate {
  double probability = 0.0;
  double standard_error = 0.0;
  std::size_t trials = 0;
};

/// Fraction of `trials` independent samples of size n (orthonormal sampler)
/// that contain every basis direction; SE = sqrt(q(1-q)/m); needs m >= 100. Trial k draws from
/// its own stream mix64(master_seed, k) and consumes it sequentially, so a
/// sample of size n is a prefix of the sample of size n+1 for the same seed.
CoverageEstimate mc_coverage_probability(std::size_t d, double p, std::size_t n,
                                         std::size_t trials, std::uint64_t master_seed);

}  // namespace rlhflab
