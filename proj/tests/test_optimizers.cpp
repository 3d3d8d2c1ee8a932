#include <gtest/gtest.h>

#include <cmath>

#include "rlhf_lab/coverage.hpp"
#include "rlhf_lab/generators.hpp"
#include "rlhf_lab/gradients.hpp"
#include "rlhf_lab/model.hpp"
#include "rlhf_lab/optimizers.hpp"
#include "test_support.hpp"

using namespace rlhflab;
using rlhflab::testing::random_in_ball;
using rlhflab::testing::two_point_env;
using rlhflab::testing::vec;

TEST(Schedule, StepRules) {
  const Environment env = two_point_env();
  const OptimizerTrace ga = run_ga(env, Dataset({0}), vec({0.0}), 5);
  EXPECT_DOUBLE_EQ(ga.schedule.step_at(1), 1.0 / 25.0);
  EXPECT_DOUBLE_EQ(ga.schedule.step_at(9), 1.0 / 25.0);
  const OptimizerTrace sga = run_sga(env, Dataset({0}), vec({0.0}), 5, 1);
  EXPECT_DOUBLE_EQ(sga.schedule.step_at(1), 1.0 / 50.0);
  EXPECT_DOUBLE_EQ(sga.schedule.step_at(4), 1.0 / 100.0);
}

TEST(RunGa, RejectsBadArguments) {
  const Environment env = two_point_env();
  EXPECT_THROW(run_ga(env, Dataset({0}), vec({0.0}), 0), std::invalid_argument);
  EXPECT_THROW(run_ga(env, Dataset({0}), vec({1.5}), 10), std::invalid_argument);
  EXPECT_THROW(run_sga(env, Dataset({0}), vec({0.0}), 0, 1), std::invalid_argument);
}

TEST(RunGa, FixedPointAtThetaStar) {
  const Environment env = gen_env_random(3, 3, 4, 1);
  const OptimizerTrace tr = run_ga(env, Dataset({0, 1, 2}), env.theta_star(), 50);
  for (std::size_t i = 0; i < tr.iterates.size(); ++i) {
    EXPECT_EQ(tr.iterates[i].theta(), env.theta_star());
    EXPECT_EQ(tr.grad_norms[i], 0.0);
  }
  const OptimizerTrace sg = run_sga(env, Dataset({0, 1, 2}), env.theta_star(), 50, 3);
  for (double g : sg.grad_norms) EXPECT_EQ(g, 0.0);
}

TEST(RunGa, MatchesIndependentScalarIteration) {
  // theta_{t+1} = theta_t + (1/25) * 4 pi (1 - pi) (1 - theta_t), pi = sigmoid(2 theta_t).
  const Environment env = two_point_env(1.0);
  const std::size_t T = 1000;
  const OptimizerTrace tr = run_ga(env, Dataset({0}), vec({0.0}), T);
  double theta = 0.0, last_dist = 1.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double pi = 1.0 / (1.0 + std::exp(-2.0 * theta));
    theta += (1.0 / 25.0) * 4.0 * pi * (1.0 - pi) * (1.0 - theta);
    EXPECT_LE(std::abs(1.0 - theta), last_dist);
    last_dist = std::abs(1.0 - theta);
  }
  EXPECT_NEAR(tr.final_iterate.theta()[0], theta, 1e-12);
  EXPECT_LE(std::abs(tr.final_iterate.theta()[0] - 1.0), 1e-3);
  for (std::size_t i = 1; i < tr.iterates.size(); ++i) {
    EXPECT_LE(std::abs(1.0 - tr.iterates[i].theta()[0]), std::abs(1.0 - tr.iterates[i - 1].theta()[0]));
  }
}

TEST(RunGa, LemmaBoundArithmetic) {
  // L_f = 9, R = 1, C = 1, T = 108 gives 12 * 9 / 108 = 1.
  EXPECT_DOUBLE_EQ(12.0 * smoothness_constant(1.0, 1.0) * 1.0 * 1.0 / 108.0, 1.0);
  Matrix f(2, 1);
  f << 1.0, -1.0;
  const Environment env(std::vector<Context>{make_uniform_context(f)}, vec({1.0 / 3.0}), 1.0, 1.0 / 3.0);
  const OptimizerTrace tr = run_ga(env, Dataset({0}), vec({0.0}), 108);
  EXPECT_DOUBLE_EQ(tr.ga_bound, 1.0);
  EXPECT_LE(tr.selected_grad_norm() * tr.selected_grad_norm(), 1.0);
  EXPECT_TRUE(tr.ga_bound_holds);
}

TEST(RunGa, BoundAscentAndRadiusOnRandomRuns) {
  Rng rng(10);
  for (int k = 0; k < 60; ++k) {
    const std::size_t d = 1 + rng.index(6);
    const Environment env = gen_env_random(d, 2 + rng.index(4), 6, rng.next_u64());
    const Dataset S = Dataset::sample(env, 1 + rng.index(8), rng);
    const Vector init = random_in_ball(static_cast<Eigen::Index>(d), env.param_bound(), rng);
    const std::size_t T = 20 + rng.index(300);
    const OptimizerTrace tr = run_ga(env, S, init, T);
    double best = 1e300;
    for (double g : tr.grad_norms) best = std::min(best, g * g);
    const double bound = 12.0 * smoothness_constant(env.radius(), env.feature_bound()) * env.radius() *
                         env.feature_bound() / static_cast<double>(T);
    EXPECT_LE(best, bound + 1e-9);
    EXPECT_LE(tr.max_iterate_norm, env.radius() + 1e-10);
    for (std::size_t i = 1; i < tr.iterates.size(); ++i) {
      EXPECT_GE(empirical_objective(env, tr.iterates[i].theta(), S),
                empirical_objective(env, tr.iterates[i - 1].theta(), S) - 1e-12);
    }
    const OptimizerTrace sg = run_sga(env, S, init, T, rng.next_u64());
    EXPECT_LE(sg.max_iterate_norm, env.radius() + 1e-10);
    for (const ParamVector& p : sg.iterates) EXPECT_TRUE(p.within_budget(1e-10));
  }
}

TEST(RunSga, DeterministicForSeed) {
  const Environment env = gen_env_random(4, 3, 10, 5);
  Rng rng(1);
  const Dataset S = Dataset::sample(env, 6, rng);
  const OptimizerTrace a = run_sga(env, S, Vector::Zero(4), 3000, 99);
  const OptimizerTrace b = run_sga(env, S, Vector::Zero(4), 3000, 99);
  ASSERT_EQ(a.iterates.size(), b.iterates.size());
  for (std::size_t i = 0; i < a.iterates.size(); ++i) EXPECT_EQ(a.iterates[i].theta(), b.iterates[i].theta());
  EXPECT_EQ(a.grad_norms, b.grad_norms);
  EXPECT_EQ(a.selected_index, b.selected_index);
  const OptimizerTrace c = run_sga(env, S, Vector::Zero(4), 3000, 100);
  EXPECT_NE(a.final_iterate.theta(), c.final_iterate.theta());
}

TEST(RunSga, SingleExampleFollowsDeterministicPath) {
  // With n = 1 every step uses the full gradient; only the step schedule differs from GA.
  const Environment env = two_point_env(0.8);
  const OptimizerTrace tr = run_sga(env, Dataset({0}), vec({0.0}), 200, 7, {.max_recorded = 1000, .stride = 1});
  double theta = 0.0;
  for (std::size_t t = 1; t <= 200; ++t) {
    const double pi = 1.0 / (1.0 + std::exp(-2.0 * theta));
    theta += 1.0 / (50.0 * std::sqrt(static_cast<double>(t))) * 4.0 * pi * (1.0 - pi) * (0.8 - theta);
  }
  EXPECT_NEAR(tr.final_iterate.theta()[0], theta, 1e-13);
  EXPECT_EQ(tr.evaluations, 201u);
}

TEST(RunSga, GradientNormDecayRate) {
  // Median over seeds of the squared full-gradient norm of the selected iterate,
  // fitted in log-log against T.
  const Environment env = gen_env_random(5, 3, 40, 12);
  Rng rng(4);
  const Dataset S = Dataset::sample(env, 20, rng);
  std::vector<double> Ts, med;
  for (std::size_t T : {100u, 1000u, 10000u, 100000u, 1000000u}) {
    std::vector<double> sq;
    for (std::uint64_t seed = 0; seed < 9; ++seed) {
      const OptimizerTrace tr = run_sga(env, S, Vector::Zero(5), T, seed);
      sq.push_back(tr.selected_grad_norm() * tr.selected_grad_norm());
    }
    std::sort(sq.begin(), sq.end());
    Ts.push_back(static_cast<double>(T));
    med.push_back(sq[sq.size() / 2]);
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    mx += std::log(Ts[i]);
    my += std::log(med[i]);
  }
  mx /= static_cast<double>(Ts.size());
  my /= static_cast<double>(Ts.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    sxy += (std::log(Ts[i]) - mx) * (std::log(med[i]) - my);
    sxx += (std::log(Ts[i]) - mx) * (std::log(Ts[i]) - mx);
  }
  const double slope = sxy / sxx;
  EXPECT_LE(slope, -0.2);
  EXPECT_GE(slope, -0.8);
}

TEST(SelectOutput, TieAndOrderRules) {
  EXPECT_EQ(select_output_index({3.0, 2.0, 1.0}), 2u);
  EXPECT_EQ(select_output_index({1.0, 1.0, 1.0}), 0u);
  EXPECT_EQ(select_output_index({3.0, 1.0, 2.0}), 1u);
  EXPECT_THROW(select_output_index({}), std::invalid_argument);
  const Environment env = two_point_env();
  const OptimizerTrace tr = run_ga(env, Dataset({0}), vec({0.0}), 30);
  EXPECT_EQ(select_output(tr).theta(), tr.iterates.back().theta());  // monotone norms
}

TEST(RunSga, SelectedIterateHasMinimalRecordedNorm) {
  const Environment env = gen_env_random(3, 4, 8, 6);
  Rng rng(2);
  const Dataset S = Dataset::sample(env, 5, rng);
  const OptimizerTrace tr = run_sga(env, S, Vector::Zero(3), 50000, 4);
  EXPECT_EQ(tr.selected_grad_norm(), *std::min_element(tr.grad_norms.begin(), tr.grad_norms.end()));
  EXPECT_LE(tr.iterates.size(), 10001u + 1u);
}

TEST(FindStationary, PositiveDefiniteRecoversThetaStar) {
  const Environment env = gen_env_orthonormal(6, 0.3, 3);
  const Dataset S({0, 1, 2, 3, 4, 5, 0});
  const double tol = 1e-8;
  const StationaryResult r = find_stationary(env, S, tol, 10000);
  ASSERT_TRUE(r.converged);
  const double sigma = empirical_covariance(env, r.theta.theta(), S).sigma_min();
  EXPECT_LE((r.theta.theta() - env.theta_star()).norm(), 10.0 * tol / sigma);
  StationaryOptions ga;
  ga.solver = StationarySolver::kGradientAscent;
  const StationaryResult g = find_stationary(env, S, tol, 200000, ga);
  ASSERT_TRUE(g.converged);
  EXPECT_LE((g.theta.theta() - env.theta_star()).norm(), 10.0 * tol / sigma);
}

TEST(FindStationary, ImmediateReturnAtThetaStar) {
  const Environment env = gen_env_random(3, 3, 4, 2);
  StationaryOptions o;
  o.init = env.theta_star();
  const StationaryResult r = find_stationary(env, Dataset({0, 1}), 1e-8, 100, o);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.steps, 0u);
  EXPECT_EQ(r.theta.theta(), env.theta_star());
  EXPECT_THROW(find_stationary(env, Dataset({0}), 0.0, 100), std::invalid_argument);
}

TEST(FindStationary, NonConvergenceIsFlagged) {
  const Environment env = gen_env_random(3, 3, 4, 2);
  StationaryOptions o;
  o.solver = StationarySolver::kGradientAscent;
  const StationaryResult r = find_stationary(env, Dataset({0, 1}), 1e-14, 3, o);
  EXPECT_FALSE(r.converged);
  EXPECT_GT(r.grad_norm, 1e-14);
}

TEST(FindStationary, RankDeficientMultiStartAgreement) {
  // The stationary point is the projection of theta* onto C(V_S); every start
  // inside the D-ball reaches the same empirical value and training policies.
  const RankDeficientEnvironment g = gen_env_rank_deficient(12, 8, 40, 21);
  Rng rng(6);
  const Dataset S = Dataset::sample(g.env, 5, rng);
  std::vector<StationaryResult> results;
  for (int k = 0; k < 10; ++k) {
    StationaryOptions o;
    o.init = k == 0 ? Vector(Vector::Zero(12)) : random_in_ball(12, 1.0, rng);
    results.push_back(find_stationary(g.env, S, 1e-10, 10000, o));
    ASSERT_TRUE(results.back().converged);
  }
  const double j0 = empirical_objective(g.env, results[0].theta.theta(), S);
  const Matrix P = column_space_projector(empirical_covariance(g.env, Vector::Zero(12), S));
  EXPECT_LE((results[0].theta.theta() - P * g.env.theta_star()).norm(), 1e-8);
  for (const auto& r : results) {
    EXPECT_NEAR(empirical_objective(g.env, r.theta.theta(), S), j0, 1e-8);
    for (std::size_t x : S) {
      const double tv = 0.5 * (policy_probs(g.env, r.theta.theta(), x) - policy_probs(g.env, results[0].theta.theta(), x))
                                  .cwiseAbs()
                                  .sum();
      EXPECT_LE(tv, 1e-4);
    }
  }
}
