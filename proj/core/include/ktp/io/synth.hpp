#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ktp/io/clip.hpp"
#include "ktp/pose.hpp"
#include "ktp/topology.hpp"

namespace ktp::io {

struct SynthSpec {
  std::uint64_t seed = 0;
  std::size_t frames = 27;
  std::string skeleton = "h36m17";  // "h36m17", "chain<N>", or a skeleton file path
  std::vector<double> bone_lengths;  // mm, one per edge in edge order; empty = defaults
  std::size_t harmonics = 3;
  double amplitude = 0.35;  // rad, bound on each joint angle
  double fps = 50.0;
  double base_frequency = 0.6;  // Hz of the first harmonic
  double focal_length = 1145.0;  // px
  double image_width = 1000.0;   // px
  double camera_distance = 4500.0;  // mm, pelvis depth
  double noise_std = 0.0;  // px
  std::size_t clips = 1;
  std::string name = "synth";

  void validate(std::size_t edge_count) const;
  bool operator==(const SynthSpec&) const = default;
};

SynthSpec parse_synth_spec(const std::string& text);
std::string format_synth_spec(const SynthSpec& spec);
SynthSpec load_synth_spec(const std::filesystem::path& path);

SkeletonGraph synth_skeleton(const SynthSpec& spec, const std::filesystem::path& base_dir = {});
std::vector<double> default_bone_lengths(const SkeletonGraph& skeleton);

struct SynthClip {
  PoseSequence gt3d;     // T×N×3, root-relative camera coordinates, mm
  PoseSequence input2d;  // T×N×2, normalized image coordinates
};

// Clip `index` of the set described by `spec`; deterministic in (seed, index).
SynthClip synth_generate(const SynthSpec& spec, const SkeletonGraph& skeleton,
                         std::size_t index = 0);

// Pinhole projection of root-relative gt (pelvis placed on the optical axis
// at camera_distance) to normalized coordinates, without noise.
PoseSequence project_to_normalized(const PoseSequence& gt3d, const SynthSpec& spec);

// Writes <out>/<name>_<i>.in2d.clip and .gt3d.clip for every clip; returns
// the stems written.
std::vector<std::string> write_synth_set(const SynthSpec& spec, const SkeletonGraph& skeleton,
                                         const std::filesystem::path& out_dir);

}  // namespace ktp::io
