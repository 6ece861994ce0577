#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ktp/model.hpp"
#include "ktp/training.hpp"

namespace ktp::io {

struct KeyValue {
  std::string key;
  std::string value;
  std::size_t offset = 0;  // byte offset of the line
};

// `key = value` lines; `#` starts a comment, blank lines are skipped.
// Duplicate keys are rejected.
std::vector<KeyValue> parse_key_values(const std::string& text);

struct RunConfig {
  ModelConfig model = ModelConfig::desk();
  LossWeights loss;
  AdamSettings adam;
  TrainSchedule schedule;
  std::uint64_t seed = 0;
  std::string skeleton;  // path to a skeleton file; empty selects the default layout

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

// Unknown keys and malformed values raise ParseError; missing keys keep
// their defaults.
RunConfig parse_run_config(const std::string& text);
// Every key, fixed order; parse_run_config(format_run_config(c)) == c.
std::string format_run_config(const RunConfig& config);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& config, const std::filesystem::path& path);

// KTP_SEED from the environment, if set and non-empty.
std::optional<std::uint64_t> seed_override();
// Applies seed_override() to the config. Returns true when it did.
bool apply_seed_override(RunConfig& config);

// Shortest decimal text that parses back to the same double.
std::string format_real(double value);

// Skeleton named by the config, resolved relative to `base_dir`.
SkeletonGraph resolve_skeleton(const RunConfig& config, const std::filesystem::path& base_dir);

}  // namespace ktp::io
