#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ktp/io/clip.hpp"
#include "ktp/model.hpp"
#include "ktp/training.hpp"

namespace ktp::io {

struct ClipPair {
  std::string stem;
  Clip input2d;  // <stem>.in2d.clip
  Clip gt3d;     // <stem>.gt3d.clip
};

// Every <stem>.in2d.clip in `dir` with its <stem>.gt3d.clip, sorted by stem.
std::vector<ClipPair> load_clip_pairs(const std::filesystem::path& dir);

// Window starts covering `length` frames with windows of `window` frames:
// 0, w, 2w, ..., and a final window ending at the last frame.
std::vector<std::size_t> window_starts(std::size_t length, std::size_t window);

PoseSequence slice_frames(const PoseSequence& seq, std::size_t first, std::size_t count);

// Cuts each pair into model-sized training windows. Rejects clips shorter
// than `frames`, joint-count mismatches, and 2D/3D length mismatches.
std::vector<TrainingClip> make_training_windows(const std::vector<ClipPair>& pairs,
                                                std::size_t frames, std::size_t joints);

// Windowed lifting of a whole clip; output is in `unit` (the head predicts meters).
PoseSequence predict_sequence(const Model& model, const PoseSequence& input2d,
                              const std::string& unit = "mm");

}  // namespace ktp::io
