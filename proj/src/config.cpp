#include "rlhf_lab/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

namespace rlhflab {

ConfigError::ConfigError(const std::string& message, std::string key, std::size_t line)
    : std::runtime_error(message), key_(std::move(key)), line_(line) {}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

struct Entry {
  std::string value;
  std::size_t line;
};

[[noreturn]] void fail(const std::string& key, std::size_t line, const std::string& what) {
  std::string msg;
  if (line > 0) msg = "line " + std::to_string(line) + ": ";
  msg += "key '" + key + "': " + what;
  throw ConfigError(msg, key, line);
}

std::uint64_t to_u64(const std::string& key, const Entry& e, const std::string& text) {
  std::uint64_t v = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) {
    // Allow scientific notation for large step counts (1e7).
    double d = 0.0;
    auto [p2, ec2] = std::from_chars(first, last, d);
    if (ec2 != std::errc() || p2 != last || !(d >= 0.0) || d != static_cast<double>(static_cast<std::uint64_t>(d))) {
      fail(key, e.line, "expected a nonnegative integer, got '" + text + "'");
    }
    return static_cast<std::uint64_t>(d);
  }
  return v;
}

double to_double(const std::string& key, const Entry& e, const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) fail(key, e.line, "expected a number, got '" + text + "'");
  return v;
}

std::vector<std::size_t> to_counts(const std::string& key, const Entry& e) {
  std::vector<std::size_t> out;
  for (const std::string& item : split(e.value, ',')) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(to_u64(key, e, item));
      continue;
    }
    std::string hi = item.substr(dots + 2);
    std::uint64_t step = 1;
    if (const auto colon = hi.find(':'); colon != std::string::npos) {
      step = to_u64(key, e, trim(hi.substr(colon + 1)));
      hi = hi.substr(0, colon);
    }
    const std::uint64_t a = to_u64(key, e, trim(item.substr(0, dots)));
    const std::uint64_t b = to_u64(key, e, trim(hi));
    if (step == 0) fail(key, e.line, "range step must be positive");
    if (b < a) fail(key, e.line, "empty range " + item);
    for (std::uint64_t v = a; v <= b; v += step) out.push_back(v);
  }
  if (out.empty()) fail(key, e.line, "empty list");
  return out;
}

std::vector<double> to_doubles(const std::string& key, const Entry& e) {
  std::vector<double> out;
  for (const std::string& item : split(e.value, ',')) out.push_back(to_double(key, e, item));
  if (out.empty()) fail(key, e.line, "empty list");
  return out;
}

std::vector<Method> to_methods(const std::string& key, const Entry& e) {
  std::vector<Method> out;
  for (const std::string& item : split(e.value, ',')) {
    const auto m = parse_method(item);
    if (!m) fail(key, e.line, "unknown method '" + item + "' (STAT, GA, SGA)");
    out.push_back(*m);
  }
  if (out.empty()) fail(key, e.line, "empty list");
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const Entry&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"kind", [](ExperimentConfig&, const std::string&, const Entry&) {}},
      {"environment",
       [](ExperimentConfig& c, const std::string& k, const Entry& e) {
         const auto env = parse_environment_kind(e.value);
         if (!env) fail(k, e.line, "unknown environment '" + e.value + "' (orthonormal, rank_deficient, random)");
         c.environment = *env;
       }},
      {"d", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.d = to_u64(k, e, e.value); }},
      {"d_eff", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.d_eff = to_u64(k, e, e.value); }},
      {"actions", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.actions = to_u64(k, e, e.value); }},
      {"n", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.n_values = to_counts(k, e); }},
      {"n_range", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.n_values = to_counts(k, e); }},
      {"p", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.p_values = to_doubles(k, e); }},
      {"T", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.steps = to_u64(k, e, e.value); }},
      {"T_max", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.max_steps = to_u64(k, e, e.value); }},
      {"checkpoints_per_decade",
       [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.checkpoints_per_decade = to_u64(k, e, e.value); }},
      {"seeds", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.seeds = to_u64(k, e, e.value); }},
      {"master_seed", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.master_seed = to_u64(k, e, e.value); }},
      {"test_set_size", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.test_set_size = to_u64(k, e, e.value); }},
      {"trials", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.trials = to_u64(k, e, e.value); }},
      {"methods", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.methods = to_methods(k, e); }},
      {"optimizer", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.methods = to_methods(k, e); }},
      {"ga_steps_factor", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.ga_steps_factor = to_double(k, e, e.value); }},
      {"sga_steps_factor", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.sga_steps_factor = to_double(k, e, e.value); }},
      {"stride", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.stride = to_u64(k, e, e.value); }},
      {"stationary_tol", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.stationary_tol = to_double(k, e, e.value); }},
      {"stationary_max_steps",
       [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.stationary_max_steps = to_u64(k, e, e.value); }},
      {"train_reserve", [](ExperimentConfig& c, const std::string& k, const Entry& e) { c.train_reserve = to_u64(k, e, e.value); }},
  };
  return table;
}

// Keys whose validate() message maps back to a single config key.
std::string key_for_message(const std::string& message) {
  static const std::vector<std::pair<std::string, std::string>> prefixes = {
      {"d_eff", "d_eff"}, {"d must", "d"}, {"actions", "actions"}, {"n range", "n"}, {"sample sizes", "n"},
      {"stability needs", "n"}, {"p ", "p"}, {"test_set_size", "test_set_size"}, {"seeds", "seeds"},
      {"trials", "trials"}, {"methods", "methods"}, {"T_max", "T_max"}, {"checkpoints", "checkpoints_per_decade"},
      {"gap_vs_T needs", "methods"}, {"stability takes", "optimizer"}, {"stationary_tol", "stationary_tol"},
      {"train_reserve", "train_reserve"}, {"step factors", "ga_steps_factor"}, {"gap sweeps", "environment"}};
  for (const auto& [prefix, key] : prefixes) {
    if (message.rfind(prefix, 0) == 0) return key;
  }
  return "config";
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, Entry> entries;
  std::vector<std::string> order;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value, got '" + line + "'", "", line_no);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!setters().count(key)) fail(key, line_no, "unknown key");
    if (entries.count(key)) fail(key, line_no, "duplicate key (first set on line " + std::to_string(entries[key].line) + ")");
    if (value.empty()) fail(key, line_no, "empty value");
    entries[key] = {value, line_no};
    order.push_back(key);
  }

  // Cross-key dimension check first: it is meaningful without a kind.
  if (entries.count("d_eff") && entries.count("d")) {
    const std::uint64_t d_eff = to_u64("d_eff", entries["d_eff"], entries["d_eff"].value);
    const std::uint64_t d = to_u64("d", entries["d"], entries["d"].value);
    if (d_eff > d) fail("d_eff", entries["d_eff"].line, "d_eff exceeds d");
  }
  if (!entries.count("kind")) throw ConfigError("key 'kind': missing required key 'kind'", "kind", 0);
  const Entry& kind_entry = entries["kind"];
  const auto kind = parse_experiment_kind(kind_entry.value);
  if (!kind) fail("kind", kind_entry.line, "unknown kind '" + kind_entry.value + "' (coverage, gap_vs_n, gap_vs_T, stability)");

  ExperimentConfig config = default_config(*kind);
  for (const std::string& key : order) setters().at(key)(config, key, entries[key]);
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    const std::string key = key_for_message(e.what());
    const std::size_t line = entries.count(key) ? entries[key].line : 0;
    fail(key, line, e.what());
  }
  return config;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string(), "config", 0);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string config_echo(const ExperimentConfig& c) {
  std::ostringstream out;
  const auto counts = [](const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_count(v[i]);
    return s;
  };
  std::string p;
  for (std::size_t i = 0; i < c.p_values.size(); ++i) p += (i ? "," : "") + format_double(c.p_values[i]);
  std::string methods;
  for (std::size_t i = 0; i < c.methods.size(); ++i) methods += std::string(i ? "," : "") + to_string(c.methods[i]);
  out << "kind=" << to_string(c.kind) << "\n"
      << "environment=" << to_string(c.environment) << "\n"
      << "d=" << c.d << "\n"
      << "d_eff=" << c.d_eff << "\n"
      << "actions=" << c.actions << "\n"
      << "n=" << counts(c.n_values) << "\n"
      << "p=" << p << "\n"
      << "T=" << c.steps << "\n"
      << "T_max=" << c.max_steps << "\n"
      << "checkpoints_per_decade=" << c.checkpoints_per_decade << "\n"
      << "seeds=" << c.seeds << "\n"
      << "master_seed=" << c.master_seed << "\n"
      << "test_set_size=" << c.test_set_size << "\n"
      << "trials=" << c.trials << "\n";
  if (!methods.empty()) out << "methods=" << methods << "\n";
  out << "ga_steps_factor=" << format_double(c.ga_steps_factor) << "\n"
      << "sga_steps_factor=" << format_double(c.sga_steps_factor) << "\n"
      << "stride=" << c.stride << "\n"
      << "stationary_tol=" << format_double(c.stationary_tol) << "\n"
      << "stationary_max_steps=" << c.stationary_max_steps << "\n"
      << "train_reserve=" << c.train_reserve << "\n";
  return out.str();
}

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_echo(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rlhflab
