#include "rlhf_lab/manifest.hpp"

#include <chrono>
#include <ctime>
#include <sstream>

#include "rlhf_lab/csv.hpp"

#ifndef RLHF_LAB_VERSION
#define RLHF_LAB_VERSION "0.0.0"
#endif

namespace rlhflab {

const char* tool_version() { return RLHF_LAB_VERSION; }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string RunManifest::render() const {
  std::ostringstream out;
  out << "tool: rlhf-lab " << tool_version() << "\n"
      << "command: " << command << "\n"
      << "master_seed: " << master_seed << "\n"
      << "jobs: " << jobs << "\n"
      << "config_hash: " << config_hash << "\n"
      << "started: " << started << "\n"
      << "finished: " << finished << "\n"
      << "exit_status: " << exit_status << "\n";
  for (const auto& a : artifacts) out << "artifact: " << a << "\n";
  for (const auto& [k, v] : notes) out << "note: " << k << "=" << v << "\n";
  out << "--- config\n" << config_echo;
  return out.str();
}

void RunManifest::write(const std::filesystem::path& path) const { write_file_atomic(path, render()); }

}  // namespace rlhflab
