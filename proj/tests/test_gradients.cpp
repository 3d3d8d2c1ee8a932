#include <gtest/gtest.h>

#include <cmath>

#include "rlhf_lab/coverage.hpp"
#include "rlhf_lab/generators.hpp"
#include "rlhf_lab/gradients.hpp"
#include "rlhf_lab/model.hpp"
#include "test_support.hpp"

using namespace rlhflab;
using rlhflab::testing::env_from;
using rlhflab::testing::random_in_ball;
using rlhflab::testing::two_point_env;
using rlhflab::testing::vec;

namespace {

struct RandomCase {
  Environment env;
  Dataset S;
  Vector theta;
};

RandomCase random_case(Rng& rng) {
  const std::size_t d = 1 + rng.index(6), k = 1 + rng.index(5), n = 1 + rng.index(8), m = 1 + rng.index(6);
  Environment env = gen_env_random(d, k, m, rng.next_u64());
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = rng.index(m);
  Vector theta = random_in_ball(static_cast<Eigen::Index>(d), env.radius(), rng);
  return {std::move(env), Dataset(std::move(idx)), std::move(theta)};
}

double rel(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(1.0, std::max(a.norm(), b.norm())); }

// Direct two-loop covariance: sum_a pi phi phi^T - mu mu^T.
Matrix naive_covariance(const Environment& env, const Vector& theta, std::size_t x) {
  const Vector pi = policy_probs(env, theta, x);
  const Matrix& f = env.context(x).features;
  Vector mu = Vector::Zero(env.dim());
  Matrix second = Matrix::Zero(env.dim(), env.dim());
  for (Eigen::Index a = 0; a < f.rows(); ++a) {
    const Vector phi = f.row(a).transpose();
    mu += pi[a] * phi;
    second += pi[a] * phi * phi.transpose();
  }
  return second - mu * mu.transpose();
}

}  // namespace

TEST(Covariance, SingleActionAndEqualFeaturesGiveZero) {
  Matrix single(1, 2);
  single << 0.3, 0.4;
  EXPECT_EQ(context_covariance(env_from({single}, vec({0.0, 0.0})), vec({1.0, 1.0}), 0).matrix().norm(), 0.0);
  Matrix same(2, 2);
  same << 0.3, 0.4, 0.3, 0.4;
  EXPECT_LE(context_covariance(env_from({same}, vec({0.0, 0.0})), vec({1.0, -1.0}), 0).matrix().norm(), 1e-16);
}

TEST(Covariance, TwoPointVarianceFormula) {
  Matrix f(2, 3);
  f << 0.6, 0.0, 0.8, -0.6, 0.0, -0.8;
  const double p = 0.3;
  std::vector<Context> ctx{Context(f, vec({p, 1 - p}))};
  const Environment env(ctx, vec({0.0, 0.0, 0.0}), 1.0, 1.0);
  const Vector x = vec({0.6, 0.0, 0.8});
  const Matrix expected = 4 * p * (1 - p) * x * x.transpose();
  EXPECT_LE((context_covariance(env, Vector::Zero(3), 0).matrix() - expected).norm(), 1e-15);

  Matrix e1(2, 2);
  e1 << 1.0, 0.0, -1.0, 0.0;
  const Matrix v = context_covariance(env_from({e1}, vec({0.0, 0.0})), Vector::Zero(2), 0).matrix();
  EXPECT_NEAR(v(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(v.norm(), 1.0, 1e-15);
}

TEST(Covariance, EmpiricalAveragesContexts) {
  Matrix e1(2, 2), e2(2, 2);
  e1 << 1.0, 0.0, -1.0, 0.0;
  e2 << 0.0, 1.0, 0.0, -1.0;
  const Environment env = env_from({e1, e2}, vec({0.0, 0.0}));
  EXPECT_LE((empirical_covariance(env, Vector::Zero(2), Dataset({0, 1})).matrix() - 0.5 * Matrix::Identity(2, 2)).norm(),
            1e-15);
  const Vector theta = vec({0.4, -1.1});
  const Matrix single = context_covariance(env, theta, 1).matrix();
  EXPECT_LE((empirical_covariance(env, theta, Dataset({1})).matrix() - single).norm(), 1e-16);
  EXPECT_LE((empirical_covariance(env, theta, Dataset({1, 1, 1, 1})).matrix() - single).norm(), 1e-15);
}

TEST(Covariance, MatchesNaiveSumAndRespectsNormBound) {
  Rng rng(1);
  for (int k = 0; k < 50; ++k) {
    const RandomCase c = random_case(rng);
    for (std::size_t x = 0; x < c.env.num_contexts(); ++x) {
      const CovarianceStat v = context_covariance(c.env, c.theta, x);
      EXPECT_LE((v.matrix() - naive_covariance(c.env, c.theta, x)).norm(), 1e-14);
      EXPECT_LE(v.sigma_max(), std::pow(c.env.feature_bound(), 2) + 1e-10);
      EXPECT_GE(v.sigma_min(), -1e-10 * std::max(1.0, v.sigma_max()));
      const Matrix recon = v.eigenvectors() * v.eigenvalues().asDiagonal() * v.eigenvectors().transpose();
      EXPECT_LE((v.matrix() - recon).norm(), 1e-9 * std::max(1.0, v.sigma_max()));
    }
  }
}

TEST(Gradient, TwoPointInstance) {
  const Environment env = two_point_env(1.0);
  const Dataset S({0});
  EXPECT_NEAR(gradient_closed_form(env, vec({0.0}), S)[0], 1.0, 1e-15);
  EXPECT_NEAR(gradient_score_function(env, vec({0.0}), S)[0], 1.0, 1e-15);
  EXPECT_NEAR(finite_difference_gradient(env, vec({0.0}), S, 1e-6)[0], 1.0, 1e-5);
  // At theta = 0.5 the closed form is 4 pi (1 - pi) (1 - 0.5) with pi = e / (e + 1/e).
  const double pi = std::exp(0.5) / (std::exp(0.5) + std::exp(-0.5));
  EXPECT_NEAR(gradient_closed_form(env, vec({0.5}), S)[0], 4 * pi * (1 - pi) * 0.5, 1e-15);
}

TEST(Gradient, VanishesAtThetaStar) {
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    const RandomCase c = random_case(rng);
    EXPECT_LE(gradient_closed_form(c.env, c.env.theta_star(), c.S).norm(), 1e-16);
    EXPECT_LE(gradient_score_function(c.env, c.env.theta_star(), c.S).norm(), 1e-15);
    EXPECT_LE(stochastic_gradient(c.env, c.env.theta_star(), c.S[0]).norm(), 1e-16);
  }
}

TEST(Gradient, ThreeWayAgreementOnRandomInstances) {
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const RandomCase c = random_case(rng);
    const Vector closed = gradient_closed_form(c.env, c.theta, c.S);
    const Vector score = gradient_score_function(c.env, c.theta, c.S);
    const Vector fd = finite_difference_gradient(c.env, c.theta, c.S, default_fd_step(c.theta));
    EXPECT_LE(rel(closed, score), 1e-10);
    EXPECT_LE(rel(closed, fd), 1e-5);
    EXPECT_LE(rel(score, fd), 1e-5);
  }
}

TEST(Gradient, MatrixFreeObjectiveMatchesClosedForm) {
  Rng rng(4);
  for (int k = 0; k < 40; ++k) {
    const RandomCase c = random_case(rng);
    EmpiricalObjective obj(c.env, c.S);
    EXPECT_LE(rel(obj.gradient(c.theta), gradient_closed_form(c.env, c.theta, c.S)), 1e-13);
    EXPECT_NEAR(obj.value(c.theta), empirical_objective(c.env, c.theta, c.S), 1e-13);
    Vector g;
    obj.example_gradient(0, c.theta, g);
    EXPECT_LE(rel(g, stochastic_gradient(c.env, c.theta, c.S[0])), 1e-13);
  }
}

TEST(Gradient, StochasticGradientsAverageToFullGradient) {
  Rng rng(5);
  for (int k = 0; k < 30; ++k) {
    const RandomCase c = random_case(rng);
    Vector mean = Vector::Zero(c.env.dim());
    for (std::size_t x : c.S) mean += stochastic_gradient(c.env, c.theta, x);
    mean /= static_cast<double>(c.S.size());
    const Vector full = gradient_closed_form(c.env, c.theta, c.S);
    EXPECT_LE((mean - full).norm(), 1e-14);
    const double G = std::sqrt(gradient_second_moment_bound(c.env.radius(), c.env.feature_bound()));
    for (std::size_t x : c.S) EXPECT_LE((stochastic_gradient(c.env, c.theta, x) - full).norm(), G);
  }
}

TEST(Gradient, FiniteDifferenceOfConstantObjectiveIsZero) {
  Matrix single(1, 2);
  single << 0.6, 0.8;
  const Environment env = env_from({single}, vec({0.5, 0.5}));
  EXPECT_LE(finite_difference_gradient(env, vec({0.3, -2.0}), Dataset({0}), 1e-6).norm(), 1e-9);
  EXPECT_THROW(finite_difference_gradient(env, vec({0.3, -2.0}), Dataset({0}), 0.0), std::invalid_argument);
}

TEST(Gradient, SmoothnessConstantExamples) {
  EXPECT_DOUBLE_EQ(smoothness_constant(1.0, 1.0), 9.0);
  EXPECT_DOUBLE_EQ(smoothness_constant(3.0, 2.0), 196.0);
  EXPECT_DOUBLE_EQ(smoothness_constant(0.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(gradient_second_moment_bound(3.0, 1.0), 144.0);
}

TEST(GradientProperties, LipschitzHalfOrderContinuityAndNeighbourGap) {
  Rng rng(6);
  for (int k = 0; k < 60; ++k) {
    const RandomCase c = random_case(rng);
    const double R = c.env.radius(), C = c.env.feature_bound();
    const Vector other = random_in_ball(c.env.dim(), R, rng);
    const double dist = (c.theta - other).norm();
    const double gdiff = (gradient_closed_form(c.env, c.theta, c.S) - gradient_closed_form(c.env, other, c.S)).norm();
    EXPECT_LE(gdiff, smoothness_constant(R, C) * dist + 1e-9);
    const Matrix vd = context_covariance(c.env, c.theta, c.S[0]).matrix() - context_covariance(c.env, other, c.S[0]).matrix();
    const double vdiff = Eigen::SelfAdjointEigenSolver<Matrix>(vd).eigenvalues().cwiseAbs().maxCoeff();
    EXPECT_LE(vdiff, 3.0 * std::pow(C, 2.5) * std::sqrt(dist) + 1e-9);

    const std::size_t pos = rng.index(c.S.size());
    const Dataset neighbour = c.S.with_replacement(pos, rng.index(c.env.num_contexts()));
    const double ngap = (gradient_closed_form(c.env, c.theta, c.S) - gradient_closed_form(c.env, c.theta, neighbour)).norm();
    EXPECT_LE(ngap, 4.0 * R * C * C / static_cast<double>(c.S.size()) + 1e-12);
  }
}

TEST(GradientProperties, GradientLiesInColumnSpaceForRankDeficientCovariance) {
  const RankDeficientEnvironment g = gen_env_rank_deficient(10, 6, 30, 8);
  Rng rng(8);
  for (int k = 0; k < 10; ++k) {
    const Dataset S = Dataset::sample(g.env, 3, rng);
    const Vector theta = random_in_ball(10, g.env.radius(), rng);
    const CovarianceStat v = empirical_covariance(g.env, theta, S);
    ASSERT_LT(v.rank(), 10);
    const Vector grad = gradient_closed_form(g.env, theta, S);
    EXPECT_LE((grad - column_space_projector(v) * grad).norm(), 1e-10);
  }
}
