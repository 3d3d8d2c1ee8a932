#include "rlhf_lab/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rlhf_lab/gradients.hpp"

namespace rlhflab {

DefinitenessResult positive_definite_check(const CovarianceStat& v, double sigma_floor) {
  return {v.sigma_min() > sigma_floor, v.sigma_min()};
}

Matrix column_space_projector(const CovarianceStat& v) { return v.projector(); }

double column_space_invariance_gap(const Environment& env, const Dataset& S, const Vector& theta_1,
                                   const Vector& theta_2) {
  const Matrix p1 = empirical_covariance(env, theta_1, S).projector();
  const Matrix p2 = empirical_covariance(env, theta_2, S).projector();
  return (p1 - p2).norm();
}

CoverageDecomposition residual_decomposition(const Vector& phi, const CovarianceStat& v) {
  if (phi.size() != v.dim()) throw std::invalid_argument("feature/covariance dimension mismatch");
  const Matrix projector = v.projector();
  const Vector in_space = projector * phi;
  CoverageDecomposition out;
  out.coefficients = v.pseudo_inverse() * in_space;
  out.residual = phi - in_space;
  out.residual_norm = out.residual.norm();
  out.basis_rank = v.rank();
  return out;
}

double epsilon_n(const Environment& env, const Dataset& S, const Vector& theta_ref,
                 const Dataset& probe_set) {
  const CovarianceStat v = empirical_covariance(env, theta_ref, S);
  const Matrix complement = Matrix::Identity(env.dim(), env.dim()) - v.projector();
  double worst = 0.0;
  for (std::size_t x : probe_set) {
    const Context& ctx = env.context(x);
    // Rows of features * (I - P) are the residuals r(x, a).
    const Matrix residuals = ctx.features * complement;
    worst = std::max(worst, residuals.rowwise().norm().maxCoeff());
  }
  return worst;
}

double condition_ratio(const CovarianceStat& at_stationary, const CovarianceStat& at_output) {
  if (at_stationary.rank() == 0 || at_output.rank() == 0) {
    return std::numeric_limits<double>::infinity();
  }
  return at_stationary.sigma_max() /
         (at_stationary.sigma_min_positive() * at_output.sigma_min_positive());
}

GammaConstants gamma_constants(const Environment& env, std::span<const GammaSample> samples) {
  if (samples.empty()) throw std::invalid_argument("gamma constants need at least one sample");
  GammaConstants out;
  for (const GammaSample& s : samples) {
    const CovarianceStat at_stat = empirical_covariance(env, s.theta_stationary, s.dataset);
    const CovarianceStat at_out = empirical_covariance(env, s.theta_output, s.dataset);
    const CovarianceStat at_neighbor = empirical_covariance(env, s.theta_neighbor_output, s.dataset);
    out.gamma_same = std::max(out.gamma_same, condition_ratio(at_stat, at_out));
    out.gamma_neighbor = std::max(out.gamma_neighbor, condition_ratio(at_stat, at_neighbor));
    ++out.samples;
  }
  return out;
}

CpMatrixProperties cp_matrix_properties(const Vector& p) {
  if (p.size() < 1) throw std::invalid_argument("probability vector is empty");
  if ((p.array() <= 0.0).any() || std::abs(p.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument("p must be strictly positive and sum to 1");
  }
  const Matrix cp = Matrix(p.asDiagonal()) - p * p.transpose();
  const CovarianceStat stat(cp);
  CpMatrixProperties out;
  out.rank = stat.rank();
  const Vector ones = Vector::Ones(p.size());
  out.null_residual = (cp * ones).norm();
  // The null space is one-dimensional iff rank = |p| - 1; then it is span{1}
  // exactly when 1 is annihilated.
  out.nullspace_check = out.rank == p.size() - 1 && out.null_residual <= 1e-12;
  return out;
}

Eigen::Index column_space_sum_dimension(const CovarianceStat& a, const CovarianceStat& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("dimension mismatch");
  Matrix stacked(a.dim(), a.rank() + b.rank());
  stacked << a.eigenvectors().leftCols(a.rank()), b.eigenvectors().leftCols(b.rank());
  if (stacked.cols() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(stacked);
  const Vector s = svd.singularValues();
  return (s.array() > 1e-8 * std::max(1.0, s.maxCoeff())).count();
}

}  // namespace rlhflab
