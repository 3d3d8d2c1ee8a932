#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "rlhf_lab/check.hpp"
#include "rlhf_lab/config.hpp"
#include "rlhf_lab/csv.hpp"
#include "rlhf_lab/experiments.hpp"
#include "rlhf_lab/generators.hpp"
#include "rlhf_lab/manifest.hpp"
#include "rlhf_lab/model.hpp"
#include "rlhf_lab/optimizers.hpp"

namespace fs = std::filesystem;
using namespace rlhflab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 0;
  std::optional<std::size_t> stride;
};

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("RLHF_LAB_SEED");
  if (!raw || !*raw) return std::nullopt;
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(raw, &used);
    if (used == std::string(raw).size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("RLHF_LAB_SEED is not an unsigned integer: '" + std::string(raw) + "'", "RLHF_LAB_SEED", 0);
}

bool text_sets_key(const fs::path& path, const std::string& key) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=', first);
    if (eq == std::string::npos) continue;
    std::string k = line.substr(first, eq - first);
    k.erase(k.find_last_not_of(" \t") + 1);
    if (k == key) return true;
  }
  return false;
}

std::size_t resolve_jobs(std::size_t jobs) {
  if (jobs > 0) return jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Seed precedence: --seed, then the config file, then RLHF_LAB_SEED.
ExperimentConfig load_config(const Common& common, ExperimentKind kind) {
  ExperimentConfig config = default_config(kind);
  bool file_seed = false;
  if (!common.config_path.empty()) {
    config = parse_config_file(common.config_path);
    if (config.kind != kind) {
      throw ConfigError(std::string("key 'kind': config declares ") + to_string(config.kind) +
                            " but the command asks for " + to_string(kind),
                        "kind", 0);
    }
    file_seed = text_sets_key(common.config_path, "master_seed");
  }
  if (common.seed) {
    config.master_seed = *common.seed;
  } else if (!file_seed) {
    if (const auto s = env_seed()) config.master_seed = *s;
  }
  if (common.stride) config.stride = *common.stride;
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), "config", 0);
  }
  return config;
}

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

int cmd_experiment(const std::string& kind_text, const Common& common, const std::string& invocation) {
  const auto kind = parse_experiment_kind(kind_text);
  if (!kind) {
    std::cerr << "error: unknown experiment '" << kind_text << "' (coverage, gap-n, gap-T, stability)\n";
    return kExitUsage;
  }
  const ExperimentConfig config = load_config(common, *kind);
  const fs::path out = common.out_dir.empty() ? fs::path("out") / to_string(*kind) : fs::path(common.out_dir);
  fs::create_directories(out);

  RunManifest manifest;
  manifest.command = invocation;
  manifest.config_echo = config_echo(config);
  manifest.config_hash = config_hash(config);
  manifest.master_seed = config.master_seed;
  manifest.jobs = resolve_jobs(common.jobs);
  manifest.started = utc_timestamp();
  manifest.exit_status = -1;  // overwritten on completion
  manifest.finished = "";
  manifest.write(out / "manifest.txt");

  const ExperimentReport report = run_experiment(config, manifest.jobs);
  write_csv(out / "report.csv", report.raw);
  manifest.artifacts.push_back("report.csv");
  for (const auto& [name, table] : report.plotdata) {
    const std::string file = "plotdata_" + name + ".csv";
    write_csv(out / file, table);
    manifest.artifacts.push_back(file);
  }
  manifest.notes = report.notes;
  for (const auto& [name, fit] : report.fits) {
    std::cout << name << ": slope " << format_double(fit.slope) << ", intercept " << format_double(fit.intercept)
              << ", r " << format_double(fit.r) << "\n";
  }
  for (const auto& [k, v] : report.notes) std::cout << k << ": " << v << "\n";
  manifest.finished = utc_timestamp();
  manifest.exit_status = kExitOk;
  manifest.write(out / "manifest.txt");
  std::cout << "wrote " << (out / "report.csv").string() << "\n";
  return kExitOk;
}

int cmd_decompose(const Common& common, std::size_t n, const std::string& method_text, const std::string& invocation) {
  const auto method = parse_method(method_text);
  if (!method) {
    std::cerr << "error: unknown method '" << method_text << "' (STAT, GA, SGA)\n";
    return kExitUsage;
  }
  ExperimentConfig config = load_config(common, ExperimentKind::kGapVsN);
  if (n == 0) n = config.n_values.front();
  const ExperimentInstance instance = make_instance(config, mix64(config.master_seed, 0));
  Rng rng(mix64(config.master_seed, 1));
  const Dataset S = instance.draw_dataset(n, rng);
  const TrainResult stat = train(instance.env, S, Method::kStationary, config, 0);
  const TrainResult learned = train(instance.env, S, *method, config, mix64(config.master_seed, 2));
  const SuboptimalityDecomposition dec =
      decompose_suboptimality(instance.env, learned.theta, stat.theta, S, instance.test_set);

  Table t;
  t.header = {"n", "method", "concentration", "optimization", "generalization", "sum", "gap", "grad_norm"};
  t.add_row({format_count(n), to_string(*method), format_double(dec.concentration), format_double(dec.optimization),
             format_double(dec.generalization), format_double(dec.total()), format_double(dec.gap),
             format_double(learned.grad_norm)});
  std::cout << to_csv(t);
  if (!common.out_dir.empty()) {
    const fs::path out(common.out_dir);
    fs::create_directories(out);
    write_csv(out / "decompose.csv", t);
    RunManifest manifest;
    manifest.command = invocation;
    manifest.config_echo = config_echo(config);
    manifest.config_hash = config_hash(config);
    manifest.master_seed = config.master_seed;
    manifest.jobs = 1;
    manifest.started = manifest.finished = utc_timestamp();
    manifest.artifacts = {"decompose.csv"};
    manifest.write(out / "manifest.txt");
  }
  return dec.gap <= dec.total() + 1e-12 ? kExitOk : kExitFailure;
}

Table environment_table(const Environment& env) {
  Table t;
  t.header = {"context", "weight", "action", "ref_prob"};
  for (Eigen::Index j = 0; j < env.dim(); ++j) t.header.push_back("phi_" + std::to_string(j));
  for (std::size_t x = 0; x < env.num_contexts(); ++x) {
    const Context& ctx = env.context(x);
    for (Eigen::Index a = 0; a < ctx.num_actions(); ++a) {
      std::vector<std::string> row{format_count(x), format_double(env.sampler_weights()[x]),
                                   format_count(static_cast<std::size_t>(a)), format_double(ctx.ref_probs[a])};
      for (Eigen::Index j = 0; j < env.dim(); ++j) row.push_back(format_double(ctx.features(a, j)));
      t.add_row(std::move(row));
    }
  }
  return t;
}

int cmd_env_dump(const Common& common, const std::string& kind_text, std::size_t pool_size) {
  const auto env_kind = parse_environment_kind(kind_text);
  if (!env_kind) {
    std::cerr << "error: unknown environment '" << kind_text << "' (orthonormal, rank_deficient, random)\n";
    return kExitUsage;
  }
  const ExperimentKind kind = *env_kind == EnvironmentKind::kOrthonormal ? ExperimentKind::kCoverage
                              : *env_kind == EnvironmentKind::kRandom    ? ExperimentKind::kStability
                                                                         : ExperimentKind::kGapVsN;
  ExperimentConfig config = load_config(common, kind);
  config.environment = *env_kind;
  const std::uint64_t seed = mix64(config.master_seed, 0);
  Environment env = [&] {
    switch (*env_kind) {
      case EnvironmentKind::kOrthonormal: return gen_env_orthonormal(config.d, config.p_values.front(), seed);
      case EnvironmentKind::kRankDeficient: return gen_env_rank_deficient(config.d, config.d_eff, pool_size, seed).env;
      case EnvironmentKind::kRandom: return gen_env_random(config.d, config.actions, pool_size, seed);
    }
    throw std::logic_error("unreachable");
  }();
  Table theta;
  theta.header = {"coordinate", "theta_star"};
  for (Eigen::Index j = 0; j < env.dim(); ++j) {
    theta.add_row({format_count(static_cast<std::size_t>(j)), format_double(env.theta_star()[j])});
  }
  if (common.out_dir.empty()) {
    std::cout << to_csv(environment_table(env));
    return kExitOk;
  }
  const fs::path out(common.out_dir);
  fs::create_directories(out);
  write_csv(out / "environment.csv", environment_table(env));
  write_csv(out / "theta_star.csv", theta);
  std::cout << "wrote " << (out / "environment.csv").string() << "\n";
  return kExitOk;
}

void add_common(CLI::App* cmd, Common& common, bool with_config = true) {
  if (with_config) cmd->add_option("--config", common.config_path, "key=value config file")->check(CLI::ExistingFile);
  cmd->add_option("--out", common.out_dir, "output directory");
  cmd->add_option("--seed", common.seed, "master seed (fallback: RLHF_LAB_SEED)");
  cmd->add_option("--jobs", common.jobs, "worker threads (0 = all cores)");
  cmd->add_option("--stride", common.stride, "SGA full-gradient stride");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KL-regularized linear-reward policy optimization lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("rlhf-lab ") + tool_version());

  Common common;

  CheckOptions check_options;
  std::optional<std::uint64_t> check_seed;
  auto* check = app.add_subcommand("check", "run the property suite");
  check->add_option("--seed", check_seed, "seed for the random instances");
  check->add_option("--instances", check_options.instances, "random instances per property")->check(CLI::PositiveNumber);
  check->add_flag("--inject-sign-flip", check_options.inject_score_sign_flip,
                  "negate the score-function gradient (mutation check)");
  check->add_option("--jobs", common.jobs, "accepted for symmetry; the suite is sequential");

  std::string kind_text;
  auto* experiment = app.add_subcommand("experiment", "run a sweep and write CSV outputs");
  experiment->add_option("kind", kind_text, "coverage | gap-n | gap-T | stability")->required();
  add_common(experiment, common);

  std::size_t decompose_n = 0;
  std::string decompose_method = "GA";
  auto* decompose = app.add_subcommand("decompose", "one-shot suboptimality decomposition on a rank-deficient instance");
  add_common(decompose, common);
  decompose->add_option("--n", decompose_n, "sample size (default: first n of the config)");
  decompose->add_option("--method", decompose_method, "STAT | GA | SGA");

  std::string env_kind = "rank_deficient";
  std::size_t pool_size = 100;
  auto* env = app.add_subcommand("env", "environment utilities");
  env->require_subcommand(1);
  auto* dump = env->add_subcommand("dump", "write a generated environment as CSV");
  add_common(dump, common);
  dump->add_option("--kind", env_kind, "orthonormal | rank_deficient | random");
  dump->add_option("--contexts", pool_size, "pool size for pool environments")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const std::string invocation = command_line(argc, argv);
  try {
    if (*check) {
      if (check_seed) {
        check_options.seed = *check_seed;
      } else if (const auto s = env_seed()) {
        check_options.seed = *s;
      }
      return run_check(check_options, std::cout);
    }
    if (*experiment) return cmd_experiment(kind_text, common, invocation);
    if (*decompose) return cmd_decompose(common, decompose_n, decompose_method, invocation);
    if (*dump) return cmd_env_dump(common, env_kind, pool_size);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
