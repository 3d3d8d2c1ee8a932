#include "rlhf_lab/covariance.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace rlhflab {

CovarianceStat::CovarianceStat(Matrix v) {
  if (v.rows() != v.cols()) throw std::invalid_argument("covariance must be square");
  const double scale = std::max(v.norm(), std::numeric_limits<double>::min());
  if ((v - v.transpose()).norm() > 1e-10 * scale) {
    throw std::invalid_argument("covariance must be symmetric");
  }
  matrix_ = 0.5 * (v + v.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(matrix_);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  // Eigen returns ascending order.
  eigvals_ = solver.eigenvalues().reverse();
  eigvecs_ = solver.eigenvectors().rowwise().reverse();
  threshold_ = kRankTolerance * std::max(sigma_max(), 1.0);
  rank_ = (eigvals_.array() > threshold_).count();
}

double CovarianceStat::sigma_min_positive() const {
  if (rank_ == 0) return std::numeric_limits<double>::infinity();
  return eigvals_[rank_ - 1];
}

Matrix CovarianceStat::projector() const {
  const auto q = eigvecs_.leftCols(rank_);
  return q * q.transpose();
}

Matrix CovarianceStat::pseudo_inverse() const {
  const auto q = eigvecs_.leftCols(rank_);
  return q * eigvals_.head(rank_).cwiseInverse().asDiagonal() * q.transpose();
}

}  // namespace rlhflab
