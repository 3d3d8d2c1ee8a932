#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace rlhflab {

/// Version string baked in at build time.
const char* tool_version();

/// UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

/// Provenance written next to every output artifact.
struct RunManifest {
  std::string command;
  std::string config_echo;
  std::string config_hash;
  std::uint64_t master_seed = 0;
  std::size_t jobs = 1;
  std::string started;
  std::string finished;
  int exit_status = 0;
  std::vector<std::string> artifacts;
  std::vector<std::pair<std::string, std::string>> notes;

  /// Plain key: value lines followed by the config echo block.
  std::string render() const;
  void write(const std::filesystem::path& path) const;
};

}  // namespace rlhflab
