#include "rlhf_lab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "rlhf_lab/coverage_probability.hpp"
#include "rlhf_lab/generators.hpp"
#include "rlhf_lab/model.hpp"
#include "rlhf_lab/optimizers.hpp"
#include "rlhf_lab/parallel.hpp"

namespace rlhflab {

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kCoverage: return "coverage";
    case ExperimentKind::kGapVsN: return "gap_vs_n";
    case ExperimentKind::kGapVsT: return "gap_vs_T";
    case ExperimentKind::kStability: return "stability";
  }
  return "?";
}

const char* to_string(Method method) {
  switch (method) {
    case Method::kStationary: return "STAT";
    case Method::kGA: return "GA";
    case Method::kSGA: return "SGA";
  }
  return "?";
}

const char* to_string(EnvironmentKind kind) {
  switch (kind) {
    case EnvironmentKind::kOrthonormal: return "orthonormal";
    case EnvironmentKind::kRankDeficient: return "rank_deficient";
    case EnvironmentKind::kRandom: return "random";
  }
  return "?";
}

std::optional<EnvironmentKind> parse_environment_kind(const std::string& text) {
  if (text == "orthonormal") return EnvironmentKind::kOrthonormal;
  if (text == "rank_deficient") return EnvironmentKind::kRankDeficient;
  if (text == "random") return EnvironmentKind::kRandom;
  return std::nullopt;
}

std::optional<ExperimentKind> parse_experiment_kind(const std::string& text) {
  if (text == "coverage") return ExperimentKind::kCoverage;
  if (text == "gap_vs_n" || text == "gap-n") return ExperimentKind::kGapVsN;
  if (text == "gap_vs_T" || text == "gap-T") return ExperimentKind::kGapVsT;
  if (text == "stability") return ExperimentKind::kStability;
  return std::nullopt;
}

std::optional<Method> parse_method(const std::string& text) {
  if (text == "STAT") return Method::kStationary;
  if (text == "GA") return Method::kGA;
  if (text == "SGA") return Method::kSGA;
  return std::nullopt;
}

void ExperimentConfig::validate() const {
  if (d < 2) throw std::invalid_argument("d must be at least 2");
  if (d_eff > d) throw std::invalid_argument("d_eff exceeds d");
  if (environment == EnvironmentKind::kRankDeficient && d_eff < 2) {
    throw std::invalid_argument("d_eff must be at least 2");
  }
  if (environment == EnvironmentKind::kRandom && actions < 2) {
    throw std::invalid_argument("actions must be at least 2");
  }
  if ((kind == ExperimentKind::kGapVsN || kind == ExperimentKind::kGapVsT) &&
      environment == EnvironmentKind::kOrthonormal) {
    throw std::invalid_argument("gap sweeps need a pool environment (rank_deficient or random)");
  }
  if (n_values.empty()) throw std::invalid_argument("n range is empty");
  for (std::size_t n : n_values) {
    if (n < 1) throw std::invalid_argument("sample sizes must be positive");
  }
  if (kind == ExperimentKind::kStability) {
    for (std::size_t n : n_values) {
      if (n < 2) throw std::invalid_argument("stability needs n >= 2");
    }
  }
  if (p_values.empty()) throw std::invalid_argument("p list is empty");
  for (double p : p_values) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must lie in (0,1)");
  }
  if (test_set_size < 1000) throw std::invalid_argument("test_set_size must be at least 1000");
  if (seeds < 1) throw std::invalid_argument("seeds must be at least 1");
  if (kind == ExperimentKind::kCoverage && trials < 100) {
    throw std::invalid_argument("trials must be at least 100");
  }
  if (kind != ExperimentKind::kCoverage && methods.empty()) throw std::invalid_argument("methods list is empty");
  if (kind == ExperimentKind::kGapVsT) {
    if (max_steps < 10) throw std::invalid_argument("T_max must be at least 10");
    if (checkpoints_per_decade < 1) throw std::invalid_argument("checkpoints_per_decade must be positive");
    for (Method m : methods) {
      if (m == Method::kStationary) throw std::invalid_argument("gap_vs_T needs iterative methods (GA, SGA)");
    }
  }
  if (kind == ExperimentKind::kStability && methods.size() != 1) {
    throw std::invalid_argument("stability takes exactly one optimizer");
  }
  if (!(stationary_tol > 0.0)) throw std::invalid_argument("stationary_tol must be positive");
  if (train_reserve < 1) throw std::invalid_argument("train_reserve must be positive");
  if (!(ga_steps_factor > 0.0) || !(sga_steps_factor > 0.0)) {
    throw std::invalid_argument("step factors must be positive");
  }
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::kCoverage:
      c.environment = EnvironmentKind::kOrthonormal;
      c.d = 20;
      c.d_eff = 0;
      c.p_values = {0.01, 0.02, 0.05, 0.1};
      for (std::size_t n = 20; n <= 600; n += 20) c.n_values.push_back(n);
      break;
    case ExperimentKind::kGapVsN:
      c.environment = EnvironmentKind::kRankDeficient;
      c.d = 38;
      c.d_eff = 32;
      for (std::size_t n = 7; n <= 22; ++n) c.n_values.push_back(n);
      c.methods = {Method::kStationary, Method::kGA, Method::kSGA};
      break;
    case ExperimentKind::kGapVsT:
      c.environment = EnvironmentKind::kRankDeficient;
      c.d = 18;
      c.d_eff = 14;
      c.n_values = {7, 10};
      c.methods = {Method::kGA, Method::kSGA};
      break;
    case ExperimentKind::kStability:
      // Fixed-budget GA on dense features: the output moves continuously with S.
      c.environment = EnvironmentKind::kRandom;
      c.d = 8;
      c.actions = 4;
      c.n_values = {8, 12, 16, 24, 32};
      c.methods = {Method::kGA};
      c.steps = 200;
      break;
  }
  return c;
}

std::size_t ExperimentInstance::draw_train(Rng& rng) const {
  if (train_pool.empty()) return env.sample_context(rng);
  return train_pool[rng.index(train_pool.size())];
}

Dataset ExperimentInstance::draw_dataset(std::size_t n, Rng& rng) const {
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = draw_train(rng);
  return Dataset(std::move(idx));
}

ExperimentInstance make_instance(const ExperimentConfig& config, std::uint64_t seed) {
  if (config.environment == EnvironmentKind::kOrthonormal) {
    Environment env = gen_env_orthonormal(config.d, config.p_values.front(), mix64(seed, 0));
    Rng rng(mix64(seed, 1));
    Dataset test = Dataset::sample(env, config.test_set_size, rng);
    return {std::move(env), std::move(test), {}};
  }
  const std::size_t pool = config.test_set_size + config.train_reserve;
  Environment env = config.environment == EnvironmentKind::kRandom
                        ? gen_env_random(config.d, config.actions, pool, mix64(seed, 0))
                        : gen_env_rank_deficient(config.d, config.d_eff, pool, mix64(seed, 0)).env;
  std::vector<std::size_t> test(config.test_set_size);
  for (std::size_t i = 0; i < test.size(); ++i) test[i] = i;
  std::vector<std::size_t> train(config.train_reserve);
  for (std::size_t i = 0; i < train.size(); ++i) train[i] = config.test_set_size + i;
  return {std::move(env), Dataset(std::move(test)), std::move(train)};
}

std::size_t step_budget(Method method, std::size_t n, const ExperimentConfig& config) {
  if (config.steps > 0) return config.steps;
  const double nd = static_cast<double>(n);
  switch (method) {
    case Method::kGA: return static_cast<std::size_t>(std::llround(config.ga_steps_factor * nd * nd));
    case Method::kSGA: return static_cast<std::size_t>(std::llround(config.sga_steps_factor * nd * nd * nd * nd));
    case Method::kStationary: return config.stationary_max_steps;
  }
  return 0;
}

TrainResult train(const Environment& env, const Dataset& S, Method method,
                  const ExperimentConfig& config, std::uint64_t seed) {
  const Vector init = Vector::Zero(env.dim());
  TrainResult out;
  switch (method) {
    case Method::kStationary: {
      const StationaryResult r = find_stationary(env, S, config.stationary_tol, config.stationary_max_steps);
      out.theta = r.theta.theta();
      out.grad_norm = r.grad_norm;
      out.converged = r.converged;
      out.steps = r.steps;
      break;
    }
    case Method::kGA:
    case Method::kSGA: {
      RunOptions options;
      options.stride = config.stride;
      const std::size_t T = step_budget(method, S.size(), config);
      const OptimizerTrace trace = method == Method::kGA ? run_ga(env, S, init, T, options)
                                                         : run_sga(env, S, init, T, seed, options);
      out.theta = trace.selected().theta();
      out.grad_norm = trace.selected_grad_norm();
      out.steps = T;
      break;
    }
  }
  return out;
}

std::vector<std::size_t> checkpoint_grid(std::size_t max_steps, std::size_t per_decade) {
  std::vector<std::size_t> grid;
  const double top = std::log10(static_cast<double>(max_steps));
  for (std::size_t k = 0;; ++k) {
    const double exponent = 1.0 + static_cast<double>(k) / static_cast<double>(per_decade);
    if (exponent > top + 1e-12) break;
    const auto t = static_cast<std::size_t>(std::llround(std::pow(10.0, exponent)));
    if (grid.empty() || t > grid.back()) grid.push_back(t);
  }
  if (grid.empty() || grid.back() != max_steps) grid.push_back(max_steps);
  return grid;
}

std::vector<double> Series::keys() const {
  std::vector<double> out;
  for (const auto& p : points) out.push_back(p.key);
  return out;
}

std::vector<double> Series::medians() const {
  std::vector<double> out;
  for (const auto& p : points) out.push_back(p.median);
  return out;
}

const Series& ExperimentReport::find_series(const std::string& label) const {
  for (const auto& s : series) {
    if (s.label == label) return s;
  }
  throw std::out_of_range("no series labelled " + label);
}

SweepPoint summarize(double key, std::vector<double> values) {
  SweepPoint p;
  p.key = key;
  p.median = median(values);
  p.q25 = quantile(values, 0.25);
  p.q75 = quantile(values, 0.75);
  p.values = std::move(values);
  return p;
}

namespace {

/// Per-seed streams: environment, training draws, optimizer noise.
struct SeedStreams {
  std::uint64_t instance;
  std::uint64_t data;
  std::uint64_t optimizer_base;
};

SeedStreams seed_streams(std::uint64_t master_seed, std::size_t seed_index) {
  const std::uint64_t s = mix64(master_seed, seed_index);
  return {mix64(s, 0), mix64(s, 1), mix64(s, 2)};
}

Table summary_table(const std::vector<Series>& series, const std::string& key_name,
                    bool with_inverse_sqrt) {
  Table t;
  t.header = {"series", key_name};
  if (with_inverse_sqrt) t.header.push_back("inv_sqrt_" + key_name);
  for (const char* col : {"median", "q25", "q75", "seeds"}) t.header.emplace_back(col);
  for (const Series& s : series) {
    for (const SweepPoint& p : s.points) {
      std::vector<std::string> row{s.label, format_double(p.key)};
      if (with_inverse_sqrt) row.push_back(format_double(1.0 / std::sqrt(p.key)));
      row.push_back(format_double(p.median));
      row.push_back(format_double(p.q25));
      row.push_back(format_double(p.q75));
      row.push_back(format_count(p.values.size()));
      t.add_row(std::move(row));
    }
  }
  return t;
}

Table fit_table(const std::vector<std::pair<std::string, LinearFit>>& fits) {
  Table t;
  t.header = {"fit", "slope", "intercept", "r"};
  for (const auto& [name, fit] : fits) {
    t.add_row({name, format_double(fit.slope), format_double(fit.intercept), format_double(fit.r)});
  }
  return t;
}

std::vector<double> inverse_sqrt(const std::vector<double>& xs) {
  std::vector<double> out;
  for (double x : xs) out.push_back(1.0 / std::sqrt(x));
  return out;
}

bool all_positive(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
}

}  // namespace

ExperimentReport sweep_coverage(const ExperimentConfig& config, std::size_t jobs) {
  config.validate();
  const bool exact_available = config.d <= 12;
  const std::size_t np = config.p_values.size();
  const std::size_t nn = config.n_values.size();
  std::vector<CoverageEstimate> mc(np * nn);
  std::vector<double> exact(np * nn, std::numeric_limits<double>::quiet_NaN());
  parallel_for(np * nn, jobs, [&](std::size_t k) {
    const double p = config.p_values[k / nn];
    const std::size_t n = config.n_values[k % nn];
    mc[k] = mc_coverage_probability(config.d, p, n, config.trials, config.master_seed);
    if (exact_available) exact[k] = exact_coverage_probability(config.d, p, n);
  });

  ExperimentReport report;
  report.kind = config.kind;
  report.raw.header = {"p", "n", "prob_mc", "se", "prob_exact_or_NA"};
  Table noncoverage;
  noncoverage.header = {"p", "n", "noncoverage_mc", "se", "noncoverage_exact_or_NA"};
  for (std::size_t i = 0; i < np; ++i) {
    Series s;
    s.label = "p=" + format_double(config.p_values[i]);
    for (std::size_t j = 0; j < nn; ++j) {
      const std::size_t k = i * nn + j;
      const std::string p = format_double(config.p_values[i]);
      const std::string n = format_count(config.n_values[j]);
      const std::string ex = exact_available ? format_double(exact[k]) : "NA";
      const std::string nex = exact_available ? format_double(1.0 - exact[k]) : "NA";
      report.raw.add_row({p, n, format_double(mc[k].probability), format_double(mc[k].standard_error), ex});
      noncoverage.add_row({p, n, format_double(1.0 - mc[k].probability),
                           format_double(mc[k].standard_error), nex});
      s.points.push_back(summarize(static_cast<double>(config.n_values[j]), {mc[k].probability}));
    }
    report.series.push_back(std::move(s));
  }
  report.plotdata.emplace_back("noncoverage", std::move(noncoverage));
  report.notes.emplace_back("exact_available", exact_available ? "1" : "0");
  return report;
}

ExperimentReport sweep_gap_vs_n(const ExperimentConfig& config, std::size_t jobs) {
  config.validate();
  const std::size_t n_max = *std::max_element(config.n_values.begin(), config.n_values.end());
  const std::size_t nm = config.methods.size();
  const std::size_t nn = config.n_values.size();

  struct Cell {
    double gap = 0.0;
    double grad_norm = 0.0;
    bool converged = true;
  };
  struct SeedResult {
    std::vector<Cell> cells;  // [n][method]
    double control_gap = 0.0;
  };
  std::vector<SeedResult> results(config.seeds);

  parallel_for(config.seeds, jobs, [&](std::size_t s) {
    const SeedStreams streams = seed_streams(config.master_seed, s);
    const ExperimentInstance instance = make_instance(config, streams.instance);
    Rng data_rng(streams.data);
    // Nested samples: S_n is the first n draws of one sequence per seed.
    std::vector<std::size_t> sequence(n_max);
    for (auto& x : sequence) x = instance.draw_train(data_rng);
    SeedResult& out = results[s];
    out.cells.resize(nn * nm);
    out.control_gap = suboptimality_gap(instance.env, instance.env.theta_star(), instance.test_set);
    for (std::size_t j = 0; j < nn; ++j) {
      const std::size_t n = config.n_values[j];
      const Dataset S(std::vector<std::size_t>(sequence.begin(), sequence.begin() + static_cast<std::ptrdiff_t>(n)));
      for (std::size_t m = 0; m < nm; ++m) {
        const TrainResult tr = train(instance.env, S, config.methods[m], config, mix64(streams.optimizer_base, n));
        Cell& cell = out.cells[j * nm + m];
        cell.gap = suboptimality_gap(instance.env, tr.theta, instance.test_set);
        cell.grad_norm = tr.grad_norm;
        cell.converged = tr.converged;
      }
    }
  });

  ExperimentReport report;
  report.kind = config.kind;
  report.raw.header = {"n", "inv_sqrt_n", "method", "seed", "gap", "grad_norm_achieved", "converged"};
  std::size_t non_converged = 0;
  double control = 0.0;
  for (std::size_t j = 0; j < nn; ++j) {
    const std::size_t n = config.n_values[j];
    for (std::size_t m = 0; m < nm; ++m) {
      for (std::size_t s = 0; s < config.seeds; ++s) {
        const Cell& cell = results[s].cells[j * nm + m];
        const bool stationary = config.methods[m] == Method::kStationary;
        if (stationary && !cell.converged) ++non_converged;
        report.raw.add_row({format_count(n), format_double(1.0 / std::sqrt(static_cast<double>(n))),
                            to_string(config.methods[m]), format_count(s), format_double(cell.gap),
                            format_double(cell.grad_norm), stationary ? (cell.converged ? "1" : "0") : "NA"});
      }
    }
  }
  for (const auto& r : results) control = std::max(control, r.control_gap);

  for (std::size_t m = 0; m < nm; ++m) {
    Series series;
    series.label = to_string(config.methods[m]);
    for (std::size_t j = 0; j < nn; ++j) {
      std::vector<double> values;
      for (std::size_t s = 0; s < config.seeds; ++s) values.push_back(results[s].cells[j * nm + m].gap);
      series.points.push_back(summarize(static_cast<double>(config.n_values[j]), std::move(values)));
    }
    if (series.points.size() >= 2) {
      const std::vector<double> x = inverse_sqrt(series.keys());
      const std::vector<double> y = series.medians();
      report.fits.emplace_back(series.label + ":gap_vs_inv_sqrt_n", fit_linear(x, y));
      if (series.points.size() >= 3 && all_positive(y)) {
        report.fits.emplace_back(series.label + ":loglog_gap_vs_n", fit_loglog_slope(series.keys(), y));
      }
    }
    report.series.push_back(std::move(series));
  }
  report.plotdata.emplace_back("gap_vs_n", summary_table(report.series, "n", true));
  report.plotdata.emplace_back("fit", fit_table(report.fits));
  report.notes.emplace_back("control_gap_theta_star_max", format_double(control));
  report.notes.emplace_back("stationary_non_converged", format_count(non_converged));
  return report;
}

ExperimentReport sweep_gap_vs_T(const ExperimentConfig& config, std::size_t jobs) {
  config.validate();
  const std::vector<std::size_t> grid = checkpoint_grid(config.max_steps, config.checkpoints_per_decade);
  const std::size_t n_max = *std::max_element(config.n_values.begin(), config.n_values.end());
  const std::size_t nm = config.methods.size();
  const std::size_t nn = config.n_values.size();
  const std::size_t runs_per_seed = nn * nm;

  // gaps[(seed * nn + j) * nm + m][checkpoint]
  std::vector<std::vector<double>> gaps(config.seeds * runs_per_seed);
  parallel_for(config.seeds * runs_per_seed, jobs, [&](std::size_t task) {
    const std::size_t s = task / runs_per_seed;
    const std::size_t j = (task % runs_per_seed) / nm;
    const std::size_t m = task % nm;
    const SeedStreams streams = seed_streams(config.master_seed, s);
    const ExperimentInstance instance = make_instance(config, streams.instance);
    Rng data_rng(streams.data);
    std::vector<std::size_t> sequence(n_max);
    for (auto& x : sequence) x = instance.draw_train(data_rng);
    const std::size_t n = config.n_values[j];
    const Dataset S(std::vector<std::size_t>(sequence.begin(), sequence.begin() + static_cast<std::ptrdiff_t>(n)));

    std::vector<double>& out = gaps[task];
    out.reserve(grid.size());
    Vector last_best;
    double last_gap = 0.0;
    RunOptions options;
    options.stride = config.stride;
    options.checkpoints = grid;
    options.on_checkpoint = [&](std::size_t, const ParamVector& best, double) {
      if (last_best.size() == 0 || best.theta() != last_best) {
        last_best = best.theta();
        last_gap = suboptimality_gap(instance.env, last_best, instance.test_set);
      }
      out.push_back(last_gap);
    };
    const Vector init = Vector::Zero(instance.env.dim());
    if (config.methods[m] == Method::kGA) {
      run_ga(instance.env, S, init, config.max_steps, options);
    } else {
      run_sga(instance.env, S, init, config.max_steps, mix64(streams.optimizer_base, n), options);
    }
    if (out.size() != grid.size()) throw std::logic_error("missing checkpoint evaluations");
  });

  ExperimentReport report;
  report.kind = config.kind;
  report.raw.header = {"T", "method", "n", "seed", "gap"};
  for (std::size_t j = 0; j < nn; ++j) {
    for (std::size_t m = 0; m < nm; ++m) {
      Series series;
      series.label = std::string(to_string(config.methods[m])) + ":n=" + format_count(config.n_values[j]);
      for (std::size_t c = 0; c < grid.size(); ++c) {
        std::vector<double> values;
        for (std::size_t s = 0; s < config.seeds; ++s) {
          const double gap = gaps[(s * nn + j) * nm + m][c];
          values.push_back(gap);
          report.raw.add_row({format_count(grid[c]), to_string(config.methods[m]),
                              format_count(config.n_values[j]), format_count(s), format_double(gap)});
        }
        series.points.push_back(summarize(static_cast<double>(grid[c]), std::move(values)));
      }
      const std::vector<double> y = series.medians();
      if (all_positive(y)) report.fits.emplace_back(series.label + ":loglog_gap_vs_T", fit_loglog_slope(series.keys(), y));
      report.series.push_back(std::move(series));
    }
  }
  report.plotdata.emplace_back("gap_vs_T", summary_table(report.series, "T", false));
  report.plotdata.emplace_back("fit", fit_table(report.fits));
  return report;
}

double stability_pair_value(const ExperimentInstance& instance, const Dataset& S,
                            const Dataset& S_prime, const Trainer& trainer, std::uint64_t seed) {
  const Vector theta = trainer(S, seed);
  const Vector theta_prime = trainer(S_prime, seed);
  if (theta == theta_prime) return 0.0;
  double worst = 0.0;
  for (std::size_t x : instance.test_set) {
    const double diff = per_prompt_objective(instance.env, theta, x) -
                        per_prompt_objective(instance.env, theta_prime, x);
    worst = std::max(worst, std::abs(diff));
  }
  return worst;
}

StabilityEstimate estimate_stability(const ExperimentInstance& instance, std::size_t n,
                                     std::size_t pairs, const Trainer& trainer,
                                     std::uint64_t master_seed, std::size_t jobs) {
  if (n < 2) throw std::invalid_argument("stability needs n >= 2");
  if (pairs < 1) throw std::invalid_argument("stability needs at least one pair");
  StabilityEstimate est;
  est.pair_values.resize(pairs);
  parallel_for(pairs, jobs, [&](std::size_t k) {
    // Replacement drawn first so that, for a fixed seed, S is a prefix of the same sequence for every n.
    Rng rng(mix64(master_seed, k));
    const std::size_t fresh = instance.draw_train(rng);
    const auto position = std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
    const Dataset S = instance.draw_dataset(n, rng);
    const Dataset S_prime = S.with_replacement(position, fresh);
    est.pair_values[k] = stability_pair_value(instance, S, S_prime, trainer, mix64(master_seed, pairs + k));
  });
  est.max = *std::max_element(est.pair_values.begin(), est.pair_values.end());
  est.median = median(est.pair_values);
  return est;
}

ExperimentReport sweep_stability(const ExperimentConfig& config, std::size_t jobs) {
  config.validate();
  const Method method = config.methods.front();
  const ExperimentInstance instance = make_instance(config, mix64(config.master_seed, 0));
  const Trainer trainer = [&](const Dataset& S, std::uint64_t seed) {
    return train(instance.env, S, method, config, seed).theta;
  };

  ExperimentReport report;
  report.kind = config.kind;
  report.raw.header = {"n", "inv_sqrt_n", "method", "pair", "pair_value"};
  Series max_series{"max", {}};
  Series median_series{"median", {}};
  for (std::size_t n : config.n_values) {
    const StabilityEstimate est =
        estimate_stability(instance, n, config.seeds, trainer, mix64(config.master_seed, 1), jobs);
    for (std::size_t k = 0; k < est.pair_values.size(); ++k) {
      report.raw.add_row({format_count(n), format_double(1.0 / std::sqrt(static_cast<double>(n))),
                          to_string(method), format_count(k), format_double(est.pair_values[k])});
    }
    SweepPoint point = summarize(static_cast<double>(n), est.pair_values);
    median_series.points.push_back(point);
    point.median = est.max;  // the max series carries the estimate in its median slot
    max_series.points.push_back(std::move(point));
  }
  for (const Series* s : {&max_series, &median_series}) {
    if (s->points.size() >= 2) {
      report.fits.emplace_back(s->label + ":stab_vs_inv_sqrt_n", fit_linear(inverse_sqrt(s->keys()), s->medians()));
    }
    if (s->points.size() >= 3 && all_positive(s->medians())) {
      report.fits.emplace_back(s->label + ":loglog_stab_vs_n", fit_loglog_slope(s->keys(), s->medians()));
    }
  }
  report.series.push_back(std::move(max_series));
  report.series.push_back(std::move(median_series));
  Table summary;
  summary.header = {"n", "inv_sqrt_n", "e_stab_max", "median", "q25", "q75", "pairs"};
  for (std::size_t i = 0; i < report.series[0].points.size(); ++i) {
    const SweepPoint& mx = report.series[0].points[i];
    const SweepPoint& md = report.series[1].points[i];
    summary.add_row({format_double(mx.key), format_double(1.0 / std::sqrt(mx.key)), format_double(mx.median),
                     format_double(md.median), format_double(md.q25), format_double(md.q75),
                     format_count(md.values.size())});
  }
  report.plotdata.emplace_back("stability", std::move(summary));
  report.plotdata.emplace_back("fit", fit_table(report.fits));
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& config, std::size_t jobs) {
  switch (config.kind) {
    case ExperimentKind::kCoverage: return sweep_coverage(config, jobs);
    case ExperimentKind::kGapVsN: return sweep_gap_vs_n(config, jobs);
    case ExperimentKind::kGapVsT: return sweep_gap_vs_T(config, jobs);
    case ExperimentKind::kStability: return sweep_stability(config, jobs);
  }
  throw std::invalid_argument("unknown experiment kind");
}

}  // namespace rlhflab
