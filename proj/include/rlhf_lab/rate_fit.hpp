#pragma once

#include <span>
#include <vector>

namespace rlhflab {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  /// Pearson correlation of the fitted points.
  double r = 0.0;
};

/// Ordinary least squares y = slope * x + intercept. Needs >= 2 points.
LinearFit fit_linear(std::span<const double> xs, std::span<const double> ys);

/// Least squares on (log x, log y). Needs >= 3 points, all positive; throws
/// std::invalid_argument otherwise.
LinearFit fit_loglog_slope(std::span<const double> xs, std::span<const double> ys);

double pearson_correlation(std::span<const double> xs, std::span<const double> ys);

/// Linear-interpolated quantile (type 7), q in [0, 1].
double quantile(std::vector<double> values, double q);
double median(const std::vector<double>& values);

}  // namespace rlhflab
