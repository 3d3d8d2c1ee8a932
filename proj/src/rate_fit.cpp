#include "rlhf_lab/rate_fit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rlhflab {

namespace {

struct Moments {
  double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
};

Moments moments(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("x and y lengths differ");
  if (xs.size() < 2) throw std::invalid_argument("need at least two points");
  Moments m;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    m.mx += xs[i];
    m.my += ys[i];
  }
  m.mx /= n;
  m.my /= n;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - m.mx, dy = ys[i] - m.my;
    m.sxx += dx * dx;
    m.syy += dy * dy;
    m.sxy += dx * dy;
  }
  return m;
}

}  // namespace

double pearson_correlation(std::span<const double> xs, std::span<const double> ys) {
  const Moments m = moments(xs, ys);
  if (m.sxx == 0.0 || m.syy == 0.0) return 0.0;
  return m.sxy / std::sqrt(m.sxx * m.syy);
}

LinearFit fit_linear(std::span<const double> xs, std::span<const double> ys) {
  const Moments m = moments(xs, ys);
  if (m.sxx == 0.0) throw std::invalid_argument("x values are all equal");
  LinearFit fit;
  fit.slope = m.sxy / m.sxx;
  fit.intercept = m.my - fit.slope * m.mx;
  fit.r = m.syy == 0.0 ? 0.0 : m.sxy / std::sqrt(m.sxx * m.syy);
  return fit;
}

LinearFit fit_loglog_slope(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() < 3) throw std::invalid_argument("log-log fit needs at least three points");
  if (xs.size() != ys.size()) throw std::invalid_argument("x and y lengths differ");
  std::vector<double> lx(xs.size()), ly(ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw std::invalid_argument("log-log fit needs positive values");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  return fit_linear(lx, ly);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double median(const std::vector<double>& values) { return quantile(values, 0.5); }

}  // namespace rlhflab
