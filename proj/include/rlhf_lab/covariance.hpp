#pragma once

#include "rlhf_lab/types.hpp"

namespace rlhflab {

/// Relative rank threshold: eigenvalues <= kRankTolerance * max(sigma_1, 1)
/// are numerical zeros. Shared by rank, projector and pseudoinverse.
inline constexpr double kRankTolerance = 1e-9;

/// Symmetric PSD matrix with a cached eigendecomposition (eigenvalues in
/// nonincreasing order) and the rank threshold used to split the spectrum.
class CovarianceStat {
 public:
  CovarianceStat() = default;
  /// Symmetrizes `v` and decomposes it. Throws std::invalid_argument on a
  /// non-square or visibly asymmetric input.
  explicit CovarianceStat(Matrix v);

  const Matrix& matrix() const { return matrix_; }
  const Vector& eigenvalues() const { return eigvals_; }
  const Matrix& eigenvectors() const { return eigvecs_; }
  double rank_threshold() const { return threshold_; }
  Eigen::Index dim() const { return matrix_.rows(); }

  Eigen::Index rank() const { return rank_; }
  double sigma_max() const { return eigvals_.size() ? eigvals_[0] : 0.0; }
  double sigma_min() const { return eigvals_.size() ? eigvals_[eigvals_.size() - 1] : 0.0; }
  /// Smallest eigenvalue above the threshold; +inf for the zero matrix.
  double sigma_min_positive() const;

  /// Orthogonal projector onto the column space.
  Matrix projector() const;
  /// Moore-Penrose pseudoinverse at the rank threshold.
  Matrix pseudo_inverse() const;

 private:
  Matrix matrix_;
  Vector eigvals_;
  Matrix eigvecs_;
  double threshold_ = 0.0;
  Eigen::Index rank_ = 0;
};

}  // namespace rlhflab
