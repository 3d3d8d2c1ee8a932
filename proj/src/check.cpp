#include "rlhf_lab/check.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "rlhf_lab/coverage.hpp"
#include "rlhf_lab/generators.hpp"
#include "rlhf_lab/gradients.hpp"
#include "rlhf_lab/model.hpp"
#include "rlhf_lab/optimizers.hpp"
#include "rlhf_lab/rng.hpp"

namespace rlhflab {

namespace {

struct Instance {
  Environment env;
  Dataset S;
  Vector theta;  // uniform in the 3D ball
};

Vector gaussian(Eigen::Index d, Rng& rng) {
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = rng.normal();
  return v;
}

Vector uniform_ball(Eigen::Index d, double radius, Rng& rng) {
  Vector v;
  do {
    v = gaussian(d, rng);
  } while (v.norm() == 0.0);
  return v.normalized() * radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
}

Instance make_instance(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t d = 2 + rng.index(5);         // 2..6
  const std::size_t actions = 2 + rng.index(4);   // 2..5
  const std::size_t n = 1 + rng.index(8);         // 1..8
  const std::size_t contexts = 1 + rng.index(8);
  Environment env = gen_env_random(d, actions, contexts, rng.next_u64());
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = rng.index(contexts);
  Vector theta = uniform_ball(static_cast<Eigen::Index>(d), env.radius(), rng);
  return {std::move(env), Dataset(std::move(idx)), std::move(theta)};
}

double relative_error(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(1.0, std::max(a.norm(), b.norm()));
}

struct Line {
  std::string name;
  bool pass;
  std::string detail;
};

std::string sci(const char* label, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s=%.3e", label, v);
  return buf;
}

}  // namespace

int run_check(const CheckOptions& options, std::ostream& out) {
  std::vector<Instance> instances;
  instances.reserve(options.instances);
  for (std::size_t i = 0; i < options.instances; ++i) instances.push_back(make_instance(mix64(options.seed, i)));
  std::vector<Line> lines;
  const auto add = [&](std::string name, bool pass, std::string detail) {
    lines.push_back({std::move(name), pass, std::move(detail)});
  };

  {
    double worst_sf = 0.0, worst_fd = 0.0;
    for (const Instance& in : instances) {
      const Vector closed = gradient_closed_form(in.env, in.theta, in.S);
      Vector score = gradient_score_function(in.env, in.theta, in.S);
      if (options.inject_score_sign_flip) score = -score;
      const Vector fd = finite_difference_gradient(in.env, in.theta, in.S, default_fd_step(in.theta));
      worst_sf = std::max(worst_sf, relative_error(closed, score));
      worst_fd = std::max({worst_fd, relative_error(closed, fd), relative_error(score, fd)});
    }
    add("gradient: closed form vs score function", worst_sf <= 1e-10, sci("max_rel", worst_sf));
    add("gradient: analytic vs central differences", worst_fd <= 1e-5, sci("max_rel", worst_fd));
  }

  {
    double worst_norm = 0.0, min_kl = 0.0, worst_opt = 0.0, worst_dom = 0.0;
    for (const Instance& in : instances) {
      const Vector& ts = in.env.theta_star();
      for (std::size_t x = 0; x < in.env.num_contexts(); ++x) {
        const Vector pi = policy_probs(in.env, in.theta, x);
        worst_norm = std::max(worst_norm, std::abs(pi.sum() - 1.0));
        if (pi.minCoeff() <= 0.0) worst_norm = std::max(worst_norm, 1.0);
        min_kl = std::min(min_kl, kl_to_ref(in.env, in.theta, x));
        // At theta* the objective equals the log partition of the reward.
        const Context& ctx = in.env.context(x);
        const Vector r = ctx.features * ts;
        const double log_z = std::log((ctx.ref_probs.array() * r.array().exp()).sum());
        worst_opt = std::max(worst_opt, std::abs(per_prompt_objective(in.env, ts, x) - log_z));
        worst_dom = std::max(worst_dom, per_prompt_objective(in.env, in.theta, x) - per_prompt_objective(in.env, ts, x));
      }
    }
    add("policy: normalized and positive", worst_norm <= 1e-12, sci("max_dev", worst_norm));
    add("policy: KL to reference nonnegative", min_kl >= -1e-12, sci("min_kl", min_kl));
    add("objective: f at theta* equals log partition", worst_opt <= 1e-10, sci("max_err", worst_opt));
    add("objective: theta* maximizes f per prompt", worst_dom <= 1e-12, sci("max_excess", worst_dom));
  }

  {
    double worst_ratio = 0.0;
    bool smooth = true;
    Rng rng(mix64(options.seed, 1'000'001));
    for (const Instance& in : instances) {
      const Vector other = uniform_ball(in.theta.size(), in.env.radius(), rng);
      const double lf = smoothness_constant(in.env.radius(), in.env.feature_bound());
      const double lhs = (gradient_closed_form(in.env, in.theta, in.S) - gradient_closed_form(in.env, other, in.S)).norm();
      const double rhs = lf * (in.theta - other).norm();
      smooth = smooth && lhs <= rhs + 1e-9;
      if (rhs > 0.0) worst_ratio = std::max(worst_ratio, lhs / rhs);
    }
    add("smoothness: gradient is L_f-Lipschitz", smooth, sci("max_ratio_to_bound", worst_ratio));
  }

  {
    std::size_t bound_violations = 0, ascent_violations = 0, norm_violations = 0, runs = 0;
    double max_norm = 0.0;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      const Instance& in = instances[i];
      const Vector init = Vector::Zero(in.theta.size());
      RunOptions opts;
      opts.enforce_invariants = false;
      const std::size_t T = 50 + 10 * (i % 10);
      const OptimizerTrace ga = run_ga(in.env, in.S, init, T, opts);
      const OptimizerTrace sga = run_sga(in.env, in.S, init, 4 * T, mix64(options.seed, 2'000'000 + i), opts);
      runs += 2;
      double best = std::numeric_limits<double>::infinity();
      for (double g : ga.grad_norms) best = std::min(best, g * g);
      if (!(best <= ga.ga_bound + 1e-9) || !ga.ga_bound_holds) ++bound_violations;
      for (std::size_t k = 1; k < ga.iterates.size(); ++k) {
        if (empirical_objective(in.env, ga.iterates[k].theta(), in.S) <
            empirical_objective(in.env, ga.iterates[k - 1].theta(), in.S) - 1e-12) {
          ++ascent_violations;
          break;
        }
      }
      for (const OptimizerTrace* tr : {&ga, &sga}) {
        max_norm = std::max(max_norm, tr->max_iterate_norm);
        if (tr->max_iterate_norm > in.env.radius() + 1e-10 || !tr->iterates_bounded) ++norm_violations;
      }
    }
    add("GA: min squared gradient norm within 12 L_f R C / T", bound_violations == 0,
        "violations=" + std::to_string(bound_violations) + "/" + std::to_string(runs / 2));
    add("GA: objective nondecreasing along iterates", ascent_violations == 0,
        "violations=" + std::to_string(ascent_violations));
    add("GA/SGA: iterates stay within radius 3D", norm_violations == 0, sci("max_norm", max_norm));
  }

  {
    double worst_gap = 0.0, worst_resid = 0.0;
    Rng rng(mix64(options.seed, 3'000'000));
    for (const Instance& in : instances) {
      const Vector other = uniform_ball(in.theta.size(), in.env.radius(), rng);
      worst_gap = std::max(worst_gap, column_space_invariance_gap(in.env, in.S, in.theta, other));
      const CovarianceStat v = empirical_covariance(in.env, in.theta, in.S);
      const Vector g = gradient_closed_form(in.env, in.theta, in.S);
      worst_resid = std::max(worst_resid, (g - v.projector() * g).norm());
    }
    add("covariance: column space invariant in theta", worst_gap <= 1e-8, sci("max_frobenius_gap", worst_gap));
    add("covariance: gradient lies in column space", worst_resid <= 1e-10, sci("max_residual", worst_resid));
  }

  {
    double worst_spread = 0.0;
    std::size_t unconverged = 0;
    Rng rng(mix64(options.seed, 4'000'000));
    const std::size_t count = std::min<std::size_t>(instances.size(), 20);
    for (std::size_t i = 0; i < count; ++i) {
      const Instance& in = instances[i];
      StationaryOptions a, b;
      a.init = Vector::Zero(in.theta.size());
      b.init = uniform_ball(in.theta.size(), in.env.param_bound(), rng);
      const StationaryResult ra = find_stationary(in.env, in.S, 1e-10, 10000, a);
      const StationaryResult rb = find_stationary(in.env, in.S, 1e-10, 10000, b);
      if (!ra.converged || !rb.converged) ++unconverged;
      worst_spread = std::max(worst_spread, std::abs(empirical_objective(in.env, ra.theta.theta(), in.S) -
                                                     empirical_objective(in.env, rb.theta.theta(), in.S)));
    }
    add("stationary: equal empirical value from different starts", unconverged == 0 && worst_spread <= 1e-8,
        sci("max_spread", worst_spread) + " unconverged=" + std::to_string(unconverged));
  }

  {
    Rng rng(mix64(options.seed, 5'000'000));
    std::size_t cp_failures = 0, sum_failures = 0;
    for (std::size_t i = 0; i < std::min<std::size_t>(instances.size(), 50); ++i) {
      const std::size_t k = 2 + rng.index(7);
      Vector p(static_cast<Eigen::Index>(k));
      for (Eigen::Index j = 0; j < p.size(); ++j) p[j] = 0.05 + rng.uniform();
      p /= p.sum();
      const CpMatrixProperties props = cp_matrix_properties(p);
      if (props.rank != p.size() - 1 || !props.nullspace_check) ++cp_failures;

      const Eigen::Index d = 3 + static_cast<Eigen::Index>(rng.index(6));
      const auto psd = [&](Eigen::Index rank) {
        Matrix f(d, rank);
        for (Eigen::Index r = 0; r < f.rows(); ++r)
          for (Eigen::Index c = 0; c < f.cols(); ++c) f(r, c) = rng.normal();
        return Matrix(f * f.transpose());
      };
      const Matrix A = psd(1 + static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(d))));
      const Matrix B = psd(1 + static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(d))));
      const Eigen::Index sum_dim = column_space_sum_dimension(CovarianceStat(A), CovarianceStat(B));
      if (sum_dim != CovarianceStat(A + B).rank()) ++sum_failures;
    }
    add("algebra: C_p has rank |p|-1 with all-ones null vector", cp_failures == 0,
        "failures=" + std::to_string(cp_failures));
    add("algebra: dim(C(A)+C(B)) = rank(A+B) for PSD pairs", sum_failures == 0,
        "failures=" + std::to_string(sum_failures));
  }

  bool all = true;
  for (const Line& l : lines) {
    out << (l.pass ? "PASS  " : "FAIL  ") << l.name << "  [" << l.detail << "]\n";
    all = all && l.pass;
  }
  out << (all ? "all " : "") << std::count_if(lines.begin(), lines.end(), [](const Line& l) { return l.pass; })
      << "/" << lines.size() << " properties passed (seed " << options.seed << ", " << options.instances
      << " instances)\n";
  return all ? 0 : 1;
}

}  // namespace rlhflab
