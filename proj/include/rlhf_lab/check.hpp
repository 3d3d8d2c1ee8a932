#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>

namespace rlhflab {

struct CheckOptions {
  std::uint64_t seed = 0;
  /// Random small environments per property.
  std::size_t instances = 100;
  /// Mutation fixture: negate the score-function gradient before comparing.
  bool inject_score_sign_flip = false;
};

/// Runs the property suite, prints one PASS/FAIL line per property and returns
/// 0 when all pass, 1 otherwise. Output depends only on the options.
int run_check(const CheckOptions& options, std::ostream& out);

}  // namespace rlhflab
