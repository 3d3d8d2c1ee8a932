#pragma once

#include <span>

#include "rlhf_lab/covariance.hpp"
#include "rlhf_lab/environment.hpp"
#include "rlhf_lab/types.hpp"

namespace rlhflab {

struct DefinitenessResult {
  bool positive_definite = false;
  double sigma_min = 0.0;
};

/// sigma_d(V) > sigma_floor.
DefinitenessResult positive_definite_check(const CovarianceStat& v, double sigma_floor);

/// Orthogonal projector onto C(V) at the shared rank threshold.
Matrix column_space_projector(const CovarianceStat& v);

/// ||P(V_S(theta_1)) - P(V_S(theta_2))||_F.
double column_space_invariance_gap(const Environment& env, const Dataset& S, const Vector& theta_1,
                                   const Vector& theta_2);

/// phi = V b + r with r orthogonal to C(V).
struct CoverageDecomposition {
  Vector coefficients;  // b
  Vector residual;      // r
  double residual_norm = 0.0;
  Eigen::Index basis_rank = 0;
};

/// b = V^+ P phi, r = (I - P) phi.
CoverageDecomposition residual_decomposition(const Vector& phi, const CovarianceStat& v);

/// Largest residual norm over every (x, a) of `probe_set` against V_S(theta_ref).
double epsilon_n(const Environment& env, const Dataset& S, const Vector& theta_ref,
                 const Dataset& probe_set);

/// sigma_max(A) / (sigma_min^+(A) * sigma_min^+(B)); +inf if either matrix is zero.
double condition_ratio(const CovarianceStat& at_stationary, const CovarianceStat& at_output);

/// Inputs for one dataset S: its stationary proxy, its optimizer output, and
/// the optimizer output on a neighbouring dataset S'.
struct GammaSample {
  Dataset dataset;
  Vector theta_stationary;
  Vector theta_output;
  Vector theta_neighbor_output;
};

/// Sampled maxima of the condition ratios; lower bounds on the suprema over
/// all datasets.
struct GammaConstants {
  double gamma_same = 0.0;      // V_S at theta*_S vs V_S at theta_{S,T}
  double gamma_neighbor = 0.0;  // V_S at theta*_S vs V_S at theta_{S',T}
  std::size_t samples = 0;
};

GammaConstants gamma_constants(const Environment& env, std::span<const GammaSample> samples);

struct CpMatrixProperties {
  Eigen::Index rank = 0;
  /// The all-ones vector is annihilated and spans the null space.
  bool nullspace_check = false;
  double null_residual = 0.0;
};

/// Builds C_p = diag(p) - p p^T and checks rank |p| - 1 with the all-ones
/// null vector. Throws std::invalid_argument unless p is a positive simplex point.
CpMatrixProperties cp_matrix_properties(const Vector& p);

/// dim(C(A) + C(B)) from stacked orthonormal bases of the two column spaces.
Eigen::Index column_space_sum_dimension(const CovarianceStat& a, const CovarianceStat& b);

}  // namespace rlhflab
