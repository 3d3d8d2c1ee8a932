#include <gtest/gtest.h>

#include <cmath>

#include "rlhf_lab/coverage.hpp"
#include "rlhf_lab/coverage_probability.hpp"
#include "rlhf_lab/generators.hpp"
#include "rlhf_lab/gradients.hpp"
#include "rlhf_lab/model.hpp"
#include "rlhf_lab/optimizers.hpp"
#include "test_support.hpp"

using namespace rlhflab;
using rlhflab::testing::env_from;
using rlhflab::testing::random_in_ball;
using rlhflab::testing::vec;

namespace {

Matrix diag(std::initializer_list<double> xs) { return vec(xs).asDiagonal(); }

Matrix random_psd(Eigen::Index d, Eigen::Index rank, Rng& rng) {
  Matrix f(d, rank);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < rank; ++j) f(i, j) = rng.normal();
  return f * f.transpose();
}

void expect_projector(const Matrix& P) {
  EXPECT_LE((P * P - P).norm(), 1e-10);
  EXPECT_LE((P - P.transpose()).norm(), 1e-10);
}

}  // namespace

TEST(CovarianceStat, RankThresholdAndPseudoInverse) {
  const CovarianceStat v(diag({2.0, 0.5, 0.0}));
  EXPECT_EQ(v.rank(), 2);
  EXPECT_DOUBLE_EQ(v.rank_threshold(), 1e-9 * 2.0);
  EXPECT_DOUBLE_EQ(v.sigma_max(), 2.0);
  EXPECT_DOUBLE_EQ(v.sigma_min_positive(), 0.5);
  EXPECT_LE((v.pseudo_inverse() - diag({0.5, 2.0, 0.0})).norm(), 1e-15);
  EXPECT_TRUE(std::isinf(CovarianceStat(Matrix::Zero(2, 2)).sigma_min_positive()));
  Matrix asym(2, 2);
  asym << 1.0, 0.5, 0.0, 1.0;
  EXPECT_THROW(CovarianceStat{asym}, std::invalid_argument);
}

TEST(PositiveDefinite, Examples) {
  const DefinitenessResult id = positive_definite_check(CovarianceStat(Matrix::Identity(3, 3)), 0.0);
  EXPECT_TRUE(id.positive_definite);
  EXPECT_DOUBLE_EQ(id.sigma_min, 1.0);
  const DefinitenessResult e1 = positive_definite_check(CovarianceStat(diag({1.0, 0.0})), 0.0);
  EXPECT_FALSE(e1.positive_definite);
  EXPECT_DOUBLE_EQ(e1.sigma_min, 0.0);
}

TEST(PositiveDefinite, OrthonormalCoverageEquivalence) {
  // V_S is diagonal with a positive entry exactly for the sampled directions.
  const Environment env = gen_env_orthonormal(8, 0.05, 4);
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const Dataset S = Dataset::sample(env, 4 + rng.index(40), rng);
    std::vector<bool> seen(8, false);
    for (std::size_t x : S) seen[x] = true;
    const bool covered = std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
    const Vector theta = random_in_ball(8, env.radius(), rng);
    const DefinitenessResult r = positive_definite_check(empirical_covariance(env, theta, S), 1e-12);
    EXPECT_EQ(r.positive_definite, covered);
  }
}

TEST(Projector, Examples) {
  EXPECT_LE((column_space_projector(CovarianceStat(diag({3.0, 1.0}))) - Matrix::Identity(2, 2)).norm(), 1e-12);
  EXPECT_EQ(column_space_projector(CovarianceStat(Matrix::Zero(3, 3))).norm(), 0.0);
  const Vector x = vec({1.0, 2.0, -2.0});
  for (double p : {0.1, 0.5, 0.9}) {
    const Matrix P = column_space_projector(CovarianceStat(4 * p * (1 - p) * x * x.transpose()));
    EXPECT_LE((P - x * x.transpose() / x.squaredNorm()).norm(), 1e-12);
    expect_projector(P);
  }
}

TEST(ColumnSpaceInvariance, HoldsUnderLinearIndependence) {
  const Environment h1 = gen_env_orthonormal(6, 0.1, 1);
  Rng rng(2);
  const Dataset S = Dataset::sample(h1, 9, rng);
  const Vector t = random_in_ball(6, 3.0, rng);
  EXPECT_EQ(column_space_invariance_gap(h1, S, t, t), 0.0);
  for (int k = 0; k < 10; ++k) {
    EXPECT_LE(column_space_invariance_gap(h1, S, random_in_ball(6, 3.0, rng), random_in_ball(6, 3.0, rng)), 1e-8);
  }
  for (int e = 0; e < 10; ++e) {
    const Environment env = gen_env_random(5, 3, 6, rng.next_u64());
    ASSERT_TRUE(env.features_linearly_independent());
    const Dataset T = Dataset::sample(env, 3, rng);
    for (int k = 0; k < 10; ++k) {
      EXPECT_LE(column_space_invariance_gap(env, T, random_in_ball(5, 3.0, rng), random_in_ball(5, 3.0, rng)), 1e-8);
    }
  }
}

TEST(ColumnSpaceInvariance, DependentFeaturesAreDetected) {
  Matrix f(3, 2);
  f << 0.5, 0.0, 0.0, 0.5, 0.5, 0.5;
  const Environment env = env_from({f}, vec({0.0, 0.0}));
  EXPECT_FALSE(env.features_linearly_independent());
  // Recorded only: the gap is a number, with no threshold asserted.
  EXPECT_TRUE(std::isfinite(column_space_invariance_gap(env, Dataset({0}), vec({0.0, 0.0}), vec({2.0, -1.0}))));
}

TEST(ResidualDecomposition, Examples) {
  const CovarianceStat e1(diag({1.0, 0.0}));
  const CoverageDecomposition d = residual_decomposition(vec({1.0, 1.0}), e1);
  EXPECT_LE((d.coefficients - vec({1.0, 0.0})).norm(), 1e-15);
  EXPECT_LE((d.residual - vec({0.0, 1.0})).norm(), 1e-15);
  const CoverageDecomposition in = residual_decomposition(vec({0.4, 0.0}), e1);
  EXPECT_LE(in.residual_norm, 1e-15);
  const CoverageDecomposition out = residual_decomposition(vec({0.0, 0.7}), e1);
  EXPECT_LE(out.coefficients.norm(), 1e-15);
  EXPECT_LE((out.residual - vec({0.0, 0.7})).norm(), 1e-15);
}

TEST(ResidualDecomposition, ReconstructionOrthogonalityAndCoefficientBound) {
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.index(6));
    const Matrix V = random_psd(d, 1 + static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(d))), rng) / 10.0;
    const CovarianceStat v(V);
    Vector phi = random_in_ball(d, 1.0, rng);
    const CoverageDecomposition dec = residual_decomposition(phi, v);
    const double scale = std::max(1.0, phi.norm());
    EXPECT_LE((phi - V * dec.coefficients - dec.residual).norm(), 1e-9 * scale);
    EXPECT_LE((column_space_projector(v) * dec.residual).norm(), 1e-9 * scale);
    EXPECT_LE(dec.coefficients.norm(), 1.0 / v.sigma_min_positive() + 1e-9);
    expect_projector(column_space_projector(v));
  }
}

TEST(EpsilonN, CoveredAndUncoveredRegimes) {
  Rng rng(5);
  // Two-action contexts with features +phi and -phi: the training features lie in C(V_S).
  std::vector<Matrix> feats;
  for (int c = 0; c < 6; ++c) {
    const Vector phi = random_in_ball(5, 1.0, rng);
    Matrix f(2, 5);
    f.row(0) = phi.transpose();
    f.row(1) = -phi.transpose();
    feats.push_back(f);
  }
  const Environment sym = env_from(feats, Vector::Zero(5));
  EXPECT_LE(epsilon_n(sym, Dataset({0, 1, 2}), random_in_ball(5, 3.0, rng), Dataset({0, 1, 2})), 1e-9);

  const RankDeficientEnvironment g = gen_env_rank_deficient(12, 8, 200, 3);
  const Dataset probe({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Dataset S = Dataset::sample(g.env, 60, rng);
  EXPECT_LE(epsilon_n(g.env, S, Vector::Zero(12), probe), 1e-8);
  EXPECT_GT(epsilon_n(g.env, Dataset::sample(g.env, 3, rng), Vector::Zero(12), probe), 1e-3);
}

TEST(EpsilonN, MedianNonincreasingInN) {
  const std::size_t d = 10, d_eff = 8;
  std::vector<std::vector<double>> eps(d_eff + 1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RankDeficientEnvironment g = gen_env_rank_deficient(d, d_eff, 300, seed);
    std::vector<std::size_t> probe(200);
    for (std::size_t i = 0; i < probe.size(); ++i) probe[i] = i;
    Rng rng(mix64(seed, 1));
    std::vector<std::size_t> seq(d_eff);
    for (auto& x : seq) x = 200 + rng.index(100);
    for (std::size_t n = 2; n <= d_eff; ++n) {
      const Dataset S(std::vector<std::size_t>(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(n)));
      eps[n].push_back(epsilon_n(g.env, S, Vector::Zero(static_cast<Eigen::Index>(d)), Dataset(probe)));
    }
  }
  double previous = 1e300;
  for (std::size_t n = 2; n <= d_eff; ++n) {
    std::sort(eps[n].begin(), eps[n].end());
    const double med = 0.5 * (eps[n][9] + eps[n][10]);
    EXPECT_LE(med, previous + 1e-12) << "n=" << n;
    previous = med;
  }
}

TEST(Gamma, RatioExamples) {
  const CovarianceStat id(Matrix::Identity(3, 3));
  EXPECT_DOUBLE_EQ(condition_ratio(id, id), 1.0);
  const CovarianceStat v(diag({2.0, 0.5}));
  EXPECT_DOUBLE_EQ(condition_ratio(v, v), 8.0);
  EXPECT_TRUE(std::isinf(condition_ratio(v, CovarianceStat(Matrix::Zero(2, 2)))));
}

TEST(Gamma, SampledMaximaAreFinite) {
  const RankDeficientEnvironment g = gen_env_rank_deficient(10, 6, 100, 2);
  Rng rng(7);
  std::vector<GammaSample> samples;
  for (int k = 0; k < 5; ++k) {
    const Dataset S = Dataset::sample(g.env, 5, rng);
    const Dataset Sp = S.with_replacement(0, rng.index(100));
    const Vector stat = find_stationary(g.env, S, 1e-10, 1000).theta.theta();
    const Vector out = run_ga(g.env, S, Vector::Zero(10), 200).selected().theta();
    const Vector nout = run_ga(g.env, Sp, Vector::Zero(10), 200).selected().theta();
    samples.push_back({S, stat, out, nout});
  }
  const GammaConstants gc = gamma_constants(g.env, samples);
  EXPECT_EQ(gc.samples, 5u);
  EXPECT_TRUE(std::isfinite(gc.gamma_same));
  EXPECT_TRUE(std::isfinite(gc.gamma_neighbor));
  EXPECT_GE(gc.gamma_same, 1.0);
  EXPECT_THROW(gamma_constants(g.env, std::span<const GammaSample>{}), std::invalid_argument);
}

TEST(Algebra, CpMatrixExamples) {
  const CpMatrixProperties half = cp_matrix_properties(vec({0.5, 0.5}));
  EXPECT_EQ(half.rank, 1);
  EXPECT_TRUE(half.nullspace_check);
  EXPECT_EQ(cp_matrix_properties(vec({1.0 / 3, 1.0 / 3, 1.0 / 3})).rank, 2);
  EXPECT_EQ(cp_matrix_properties(vec({1.0})).rank, 0);
  EXPECT_THROW(cp_matrix_properties(vec({0.5, 0.6})), std::invalid_argument);
  EXPECT_THROW(cp_matrix_properties(vec({1.0, 0.0})), std::invalid_argument);
}

TEST(Algebra, RandomSimplexAndColumnSpaceSums) {
  Rng rng(8);
  for (int k = 0; k < 50; ++k) {
    Vector p(static_cast<Eigen::Index>(2 + rng.index(8)));
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = -std::log(1.0 - rng.uniform());  // Dirichlet(1)
    p /= p.sum();
    const CpMatrixProperties props = cp_matrix_properties(p);
    EXPECT_EQ(props.rank, p.size() - 1);
    EXPECT_TRUE(props.nullspace_check);
    EXPECT_LE(props.null_residual, 1e-12);

    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.index(7));
    const Matrix A = random_psd(d, 1 + static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(d))), rng);
    const Matrix B = random_psd(d, 1 + static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(d))), rng);
    EXPECT_EQ(column_space_sum_dimension(CovarianceStat(A), CovarianceStat(B)), CovarianceStat(A + B).rank());
    expect_projector(column_space_projector(CovarianceStat(A + B)));
  }
}

TEST(CoverageProbability, ExactExamples) {
  EXPECT_EQ(exact_coverage_probability(5, 0.1, 4), 0.0);
  EXPECT_NEAR(exact_coverage_probability(2, 0.5, 2), 0.5, 1e-15);
  EXPECT_NEAR(exact_coverage_probability(2, 0.5, 3), 0.75, 1e-15);
  EXPECT_THROW(exact_coverage_probability(13, 0.1, 40), std::invalid_argument);
  const std::vector<double> w{0.2, 0.3, 0.5};
  // 3 draws covering 3 categories: 3! * prod w.
  EXPECT_NEAR(exact_coverage_probability(std::span<const double>(w), 3), 6 * 0.2 * 0.3 * 0.5, 1e-15);
}

TEST(CoverageProbability, MonteCarloAgreesWithExact) {
  for (std::size_t d : {2u, 5u, 8u}) {
    for (double p : {0.02, 0.1}) {
      for (std::size_t n : {5u, 20u, 40u}) {
        const double exact = exact_coverage_probability(d, p, n);
        const CoverageEstimate mc = mc_coverage_probability(d, p, n, 10000, 17);
        const double se = std::sqrt(exact * (1 - exact) / 10000.0);
        EXPECT_LE(std::abs(mc.probability - exact), 3 * se + 1e-12) << d << " " << p << " " << n;
        EXPECT_NEAR(mc.standard_error, std::sqrt(mc.probability * (1 - mc.probability) / 10000.0), 1e-15);
      }
    }
  }
}

TEST(CoverageProbability, LargeSampleAndPreconditions) {
  const double p = 0.05;
  const std::size_t d = 10;
  EXPECT_GE(mc_coverage_probability(d, p, static_cast<std::size_t>(50 * d / p), 100, 3).probability, 0.999);
  EXPECT_THROW(mc_coverage_probability(d, p, 10, 99, 3), std::invalid_argument);
}

TEST(CoverageProbability, PrefixCouplingMakesNonCoverageMonotone) {
  double previous = 1.0;
  for (std::size_t n = 1; n <= 120; n += 7) {
    const double nc = 1.0 - mc_coverage_probability(6, 0.03, n, 2000, 5).probability;
    EXPECT_LE(nc, previous);
    previous = nc;
  }
}
