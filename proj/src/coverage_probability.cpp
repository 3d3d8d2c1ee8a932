#include "rlhf_lab/coverage_probability.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "rlhf_lab/generators.hpp"
#include "rlhf_lab/rng.hpp"

namespace rlhflab {

double exact_coverage_probability(std::span<const double> weights, std::size_t n) {
  const std::size_t k = weights.size();
  if (k == 0) throw std::invalid_argument("no categories");
  if (k > 20) throw std::invalid_argument("inclusion-exclusion limited to 20 categories");
  if (n < k) return 0.0;
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double prob = 0.0;
  const std::uint32_t subsets = 1u << k;
  for (std::uint32_t mask = 0; mask < subsets; ++mask) {
    double missed = 0.0;
    int size = 0;
    for (std::size_t i = 0; i < k; ++i) {
      if (mask & (1u << i)) {
        missed += weights[i];
        ++size;
      }
    }
    const double remaining = std::max(0.0, 1.0 - missed / total);
    const double term = std::pow(remaining, static_cast<double>(n));
    prob += (size % 2 == 0) ? term : -term;
  }
  return std::clamp(prob, 0.0, 1.0);
}

double exact_coverage_probability(std::size_t d, double p, std::size_t n) {
  if (d > 12) throw std::invalid_argument("exact coverage limited to d <= 12; use Monte Carlo");
  const std::vector<double> w = orthonormal_sampler_weights(d, p);
  return exact_coverage_probability(std::span<const double>(w), n);
}

CoverageEstimate mc_coverage_probability(std::size_t d, double p, std::size_t n,
                                         std::size_t trials, std::uint64_t master_seed) {
  if (trials < 100) throw std::invalid_argument("Monte Carlo coverage needs at least 100 trials");
  const std::vector<double> w = orthonormal_sampler_weights(d, p);
  std::vector<double> cumulative(w.size());
  std::partial_sum(w.begin(), w.end(), cumulative.begin());
  std::vector<char> seen(d);
  std::size_t successes = 0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Rng rng(mix64(master_seed, trial));
    std::fill(seen.begin(), seen.end(), 0);
    std::size_t distinct = 0;
    for (std::size_t i = 0; i < n && distinct < d; ++i) {
      const std::size_t x = rng.categorical(cumulative);
      if (!seen[x]) {
        seen[x] = 1;
        ++distinct;
      }
    }
    if (distinct == d) ++successes;
  }
  CoverageEstimate est;
  est.trials = trials;
  est.probability = static_cast<double>(successes) / static_cast<double>(trials);
  est.standard_error = std::sqrt(est.probability * (1.0 - est.probability) / static_cast<double>(trials));
  return est;
}

}  // namespace rlhflab
