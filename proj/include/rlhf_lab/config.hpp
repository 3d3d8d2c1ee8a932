#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "rlhf_lab/experiments.hpp"

namespace rlhflab {

/// A rejected configuration. line() is 0 when the problem is not tied to a
/// single line (missing keys, cross-key constraints).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, std::string key, std::size_t line);

  const std::string& key() const { return key_; }
  std::size_t line() const { return line_; }

 private:
  std::string key_;
  std::size_t line_;
};

/// key=value per line, '#' starts a comment. `kind` is required; every other
/// key falls back to default_config(kind). Lists are comma separated and
/// integer lists also accept a..b or a..b:step.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

/// Canonical key=value text; parse_config(config_echo(c)) reproduces c.
std::string config_echo(const ExperimentConfig& config);
/// FNV-1a 64 of config_echo, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

}  // namespace rlhflab
