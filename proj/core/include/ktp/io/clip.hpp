#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "ktp/pose.hpp"

namespace ktp::io {

struct Clip {
  PoseSequence pose;
  std::string name;           // empty when absent
  std::optional<double> fps;  // absent unless declared
};

// Text format:
//   ktp-clip v1 <T> <N> <D> <unit>
//   # name <name>        (optional)
//   # fps <rate>         (optional)
//   T·N lines of D decimal values, frame-major.
Clip parse_clip(const std::string& text);
std::string format_clip(const Clip& clip);

Clip load_clip_file(const std::filesystem::path& path);
void save_clip_file(const Clip& clip, const std::filesystem::path& path);

PoseSequence load_clip(const std::filesystem::path& path);
void save_clip(const PoseSequence& seq, const std::filesystem::path& path);

}  // namespace ktp::io
