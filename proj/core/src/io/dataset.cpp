#include "ktp/io/dataset.hpp"

#include <algorithm>
#include <map>

#include "ktp/error.hpp"

namespace ktp::io {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kInputSuffix = ".in2d.clip";
constexpr std::string_view kTargetSuffix = ".gt3d.clip";

}  // namespace

std::vector<ClipPair> load_clip_pairs(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("clip directory not found: " + dir.string());
  std::map<std::string, fs::path> inputs;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    const std::string file = entry.path().filename().string();
    if (file.size() > kInputSuffix.size() && file.ends_with(kInputSuffix)) {
      inputs[file.substr(0, file.size() - kInputSuffix.size())] = entry.path();
    }
  }
  if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
  if (inputs.empty()) throw ConfigError("no *" + std::string(kInputSuffix) + " files in " + dir.string());

  std::vector<ClipPair> pairs;
  for (const auto& [stem, path] : inputs) {
    const fs::path target = dir / (stem + std::string(kTargetSuffix));
    if (!fs::exists(target)) throw IoError("missing ground truth " + target.string());
    ClipPair pair{stem, load_clip_file(path), load_clip_file(target)};
    if (pair.input2d.pose.dims != 2) throw ConfigError(path.string() + ": expected D=2");
    if (pair.gt3d.pose.dims != 3) throw ConfigError(target.string() + ": expected D=3");
    if (pair.input2d.pose.frames != pair.gt3d.pose.frames ||
        pair.input2d.pose.joints != pair.gt3d.pose.joints) {
      throw ConfigError(stem + ": 2D and 3D clips disagree on T or N");
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<std::size_t> window_starts(std::size_t length, std::size_t window) {
  if (window == 0) throw ConfigError("window length must be positive");
  if (length < window) {
    throw ConfigError("clip has " + std::to_string(length) + " frames, model needs " +
                      std::to_string(window));
  }
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + window <= length; s += window) starts.push_back(s);
  if (starts.back() + window < length) starts.push_back(length - window);
  return starts;
}

PoseSequence slice_frames(const PoseSequence& seq, std::size_t first, std::size_t count) {
  if (first + count > seq.frames) throw ShapeError("frame slice out of range");
  const std::size_t stride = seq.joints * seq.dims;
  std::vector<double> values(seq.values.begin() + static_cast<std::ptrdiff_t>(first * stride),
                             seq.values.begin() + static_cast<std::ptrdiff_t>((first + count) * stride));
  return PoseSequence(count, seq.joints, seq.dims, std::move(values), seq.unit);
}

std::vector<TrainingClip> make_training_windows(const std::vector<ClipPair>& pairs,
                                                std::size_t frames, std::size_t joints) {
  std::vector<TrainingClip> clips;
  for (const ClipPair& pair : pairs) {
    if (pair.input2d.pose.joints != joints) {
      throw ConfigError(pair.stem + ": clip has " + std::to_string(pair.input2d.pose.joints) +
                        " joints, model has " + std::to_string(joints));
    }
    const auto starts = window_starts(pair.input2d.pose.frames, frames);
    for (std::size_t w = 0; w < starts.size(); ++w) {
      TrainingClip clip;
      clip.name = starts.size() == 1 ? pair.stem : pair.stem + "@" + std::to_string(starts[w]);
      clip.input2d = slice_frames(pair.input2d.pose, starts[w], frames);
      clip.gt3d = slice_frames(pair.gt3d.pose, starts[w], frames);
      clips.push_back(std::move(clip));
    }
  }
  return clips;
}

PoseSequence predict_sequence(const Model& model, const PoseSequence& input2d,
                              const std::string& unit) {
  const ModelConfig& c = model.config();
  if (input2d.dims != 2 || input2d.joints != c.joints) {
    throw ShapeError("prediction input must be T x " + std::to_string(c.joints) + " x 2, got " +
                     shape_string(input2d.shape()));
  }
  const double from_meters = 1.0 / unit_to_meters(unit);
  PoseSequence out(input2d.frames, c.joints, 3, unit);
  const std::size_t stride = c.joints * 3;
  std::size_t covered = 0;
  for (std::size_t start : window_starts(input2d.frames, c.frames)) {
    const ForwardRecord record = model.forward(slice_frames(input2d, start, c.frames));
    const auto pred = record.pred.values();
    for (std::size_t t = std::max(covered, start); t < start + c.frames; ++t) {
      for (std::size_t k = 0; k < stride; ++k) {
        out.values[t * stride + k] = pred[(t - start) * stride + k] * from_meters;
      }
    }
    covered = start + c.frames;
  }
  return out;
}

}  // namespace ktp::io
