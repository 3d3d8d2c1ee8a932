#pragma once

#include <Eigen/Dense>

namespace rlhflab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Regularization strength of the KL term. Fixed; rescaling is expressed by
/// transforming the environment's ground-truth parameter instead.
inline constexpr double kKlWeight = 1.0;

/// A policy/reward parameter together with the norm budget it must respect.
class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(Vector theta, double radius_budget)
      : theta_(std::move(theta)), radius_budget_(radius_budget) {}

  const Vector& theta() const { return theta_; }
  Vector& theta() { return theta_; }
  double radius_budget() const { return radius_budget_; }
  double norm() const { return theta_.norm(); }
  Eigen::Index dim() const { return theta_.size(); }
  bool within_budget(double slack = 1e-12) const { return norm() <= radius_budget_ + slack; }

 private:
  Vector theta_;
  double radius_budget_ = 0.0;
};

}  // namespace rlhflab
