#include "ktp/io/synth.hpp"

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include "config_values.hpp"
#include "ktp/error.hpp"
#include "ktp/io/config.hpp"
#include "ktp/rng.hpp"
#include "text_reader.hpp"

namespace ktp::io {

namespace {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Rest direction per H36M joint (child end of the bone), body frame with y up.
const std::vector<Vec3>& h36m_rest_directions() {
  static const std::vector<Vec3> dirs = {
      {0, 0, 0},    {-1, 0, 0}, {0, -1, 0}, {0, -1, 0}, {1, 0, 0},   {0, -1, 0},
      {0, -1, 0},   {0, 1, 0},  {0, 1, 0},  {0, 1, 0},  {0, 1, 0.1}, {1, 0, 0},
      {0.2, -1, 0}, {0, -1, 0.2}, {-1, 0, 0}, {-0.2, -1, 0}, {0, -1, 0.2},
  };
  return dirs;
}

struct Setter {
  std::function<void(SynthSpec&, const KeyValue&)> apply;
};

const std::map<std::string, Setter>& synth_setters() {
  using namespace detail;
  static const std::map<std::string, Setter> setters = {
      {"seed", {[](SynthSpec& s, const KeyValue& kv) { s.seed = parse_u64(kv); }}},
      {"frames", {[](SynthSpec& s, const KeyValue& kv) { s.frames = parse_count(kv); }}},
      {"skeleton", {[](SynthSpec& s, const KeyValue& kv) { s.skeleton = kv.value; }}},
      {"bone_lengths",
       {[](SynthSpec& s, const KeyValue& kv) { s.bone_lengths = parse_real_list(kv); }}},
      {"harmonics", {[](SynthSpec& s, const KeyValue& kv) { s.harmonics = parse_count(kv); }}},
      {"amplitude", {[](SynthSpec& s, const KeyValue& kv) { s.amplitude = parse_real(kv); }}},
      {"fps", {[](SynthSpec& s, const KeyValue& kv) { s.fps = parse_real(kv); }}},
      {"base_frequency",
       {[](SynthSpec& s, const KeyValue& kv) { s.base_frequency = parse_real(kv); }}},
      {"focal_length",
       {[](SynthSpec& s, const KeyValue& kv) { s.focal_length = parse_real(kv); }}},
      {"image_width", {[](SynthSpec& s, const KeyValue& kv) { s.image_width = parse_real(kv); }}},
      {"camera_distance",
       {[](SynthSpec& s, const KeyValue& kv) { s.camera_distance = parse_real(kv); }}},
      {"noise_std", {[](SynthSpec& s, const KeyValue& kv) { s.noise_std = parse_real(kv); }}},
      {"clips", {[](SynthSpec& s, const KeyValue& kv) { s.clips = parse_count(kv); }}},
      {"name", {[](SynthSpec& s, const KeyValue& kv) { s.name = kv.value; }}},
  };
  return setters;
}

Mat3 rotation_xyz(double ax, double ay, double az) {
  return (Eigen::AngleAxisd(az, Vec3::UnitZ()) * Eigen::AngleAxisd(ay, Vec3::UnitY()) *
          Eigen::AngleAxisd(ax, Vec3::UnitX()))
      .toRotationMatrix();
}

}  // namespace

void SynthSpec::validate(std::size_t edge_count) const {
  if (frames == 0) throw ConfigError("synth: frames must be positive");
  if (!bone_lengths.empty()) {
    if (bone_lengths.size() != edge_count) {
      throw ConfigError("synth: " + std::to_string(bone_lengths.size()) +
                        " bone lengths for " + std::to_string(edge_count) + " bones");
    }
    for (double b : bone_lengths) {
      if (!(b > 0.0)) throw ConfigError("synth: bone lengths must be positive");
    }
  }
  if (harmonics == 0) throw ConfigError("synth: harmonics must be at least 1");
  if (!(amplitude >= 0.0 && amplitude <= 0.6)) {
    throw ConfigError("synth: amplitude must lie in [0, 0.6] rad");
  }
  if (!(fps > 0.0) || !(base_frequency >= 0.0)) {
    throw ConfigError("synth: fps must be positive and base_frequency non-negative");
  }
  if (!(focal_length > 0.0) || !(image_width > 0.0)) {
    throw ConfigError("synth: focal_length and image_width must be positive");
  }
  if (!(camera_distance > 0.0)) throw ConfigError("synth: camera_distance must be positive");
  if (!(noise_std >= 0.0)) throw ConfigError("synth: noise_std must be non-negative");
  if (clips == 0) throw ConfigError("synth: clips must be positive");
  if (name.empty() || name.find_first_of("/\\ \t") != std::string::npos) {
    throw ConfigError("synth: name must be a non-empty token without path separators");
  }
}

SynthSpec parse_synth_spec(const std::string& text) {
  SynthSpec spec;
  const auto& setters = synth_setters();
  for (const KeyValue& kv : parse_key_values(text)) {
    const auto it = setters.find(kv.key);
    if (it == setters.end()) throw ParseError("unknown synth key '" + kv.key + "'", kv.offset);
    it->second.apply(spec, kv);
  }
  return spec;
}

std::string format_synth_spec(const SynthSpec& s) {
  using ::ktp::detail::format_double;
  std::ostringstream out;
  out << "seed = " << s.seed << '\n'
      << "frames = " << s.frames << '\n'
      << "skeleton = " << s.skeleton << '\n'
      << "bone_lengths = " << detail::format_real_list(s.bone_lengths) << '\n'
      << "harmonics = " << s.harmonics << '\n'
      << "amplitude = " << format_double(s.amplitude) << '\n'
      << "fps = " << format_double(s.fps) << '\n'
      << "base_frequency = " << format_double(s.base_frequency) << '\n'
      << "focal_length = " << format_double(s.focal_length) << '\n'
      << "image_width = " << format_double(s.image_width) << '\n'
      << "camera_distance = " << format_double(s.camera_distance) << '\n'
      << "noise_std = " << format_double(s.noise_std) << '\n'
      << "clips = " << s.clips << '\n'
      << "name = " << s.name << '\n';
  return out.str();
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  const std::string text = ::ktp::detail::read_text_file(path);
  try {
    return parse_synth_spec(text);
  } catch (const ParseError& err) {
    throw ParseError(path.string() + ": " + err.reason(), err.offset());
  }
}

SkeletonGraph synth_skeleton(const SynthSpec& spec, const std::filesystem::path& base_dir) {
  if (spec.skeleton == "h36m17") return SkeletonGraph::h36m17();
  if (spec.skeleton.rfind("chain", 0) == 0 && spec.skeleton.size() > 5) {
    std::size_t n = 0;
    const char* b = spec.skeleton.data() + 5;
    const char* e = spec.skeleton.data() + spec.skeleton.size();
    auto [ptr, ec] = std::from_chars(b, e, n);
    if (ec == std::errc() && ptr == e && n >= 2) return SkeletonGraph::chain(n);
  }
  std::filesystem::path p(spec.skeleton);
  if (p.is_relative()) p = base_dir / p;
  return load_skeleton(p);
}

std::vector<double> default_bone_lengths(const SkeletonGraph& skeleton) {
  static const std::map<std::pair<std::size_t, std::size_t>, double> h36m = {
      {{0, 1}, 132.9},  {{1, 2}, 442.9},  {{2, 3}, 454.2},  {{0, 4}, 132.9},
      {{4, 5}, 442.9},  {{5, 6}, 454.2},  {{0, 7}, 233.4},  {{7, 8}, 257.4},
      {{8, 9}, 121.1},  {{9, 10}, 115.0}, {{8, 11}, 151.0}, {{11, 12}, 278.9},
      {{12, 13}, 251.7}, {{8, 14}, 151.0}, {{14, 15}, 278.9}, {{15, 16}, 251.7},
  };
  std::vector<double> out;
  const bool is_h36m = skeleton == SkeletonGraph::h36m17();
  for (const Edge& e : skeleton.edges()) {
    const auto it = h36m.find({e.a, e.b});
    out.push_back(is_h36m && it != h36m.end() ? it->second : 250.0);
  }
  return out;
}

PoseSequence project_to_normalized(const PoseSequence& gt3d, const SynthSpec& spec) {
  if (gt3d.dims != 3) throw ShapeError("projection needs 3D input");
  PoseSequence out(gt3d.frames, gt3d.joints, 2, "norm");
  const double half_width = spec.image_width / 2.0;
  for (std::size_t t = 0; t < gt3d.frames; ++t) {
    for (std::size_t n = 0; n < gt3d.joints; ++n) {
      const double z = gt3d(t, n, 2) + spec.camera_distance;
      if (!(z > 1e-3 * spec.camera_distance)) {
        throw ConfigError("synth: joint " + std::to_string(n) + " at frame " + std::to_string(t) +
                          " lies behind or at the camera (depth " + std::to_string(z) + " mm)");
      }
      out(t, n, 0) = spec.focal_length * gt3d(t, n, 0) / z / half_width;
      out(t, n, 1) = spec.focal_length * gt3d(t, n, 1) / z / half_width;
    }
  }
  return out;
}

SynthClip synth_generate(const SynthSpec& spec, const SkeletonGraph& skeleton, std::size_t index) {
  const std::size_t joints = skeleton.joint_count();
  spec.validate(skeleton.edges().size());
  if (joints < 2) throw ConfigError("synth: skeleton needs at least two joints");
  const std::vector<std::size_t> parent = skeleton.parents(0);
  const std::vector<double> lengths =
      spec.bone_lengths.empty() ? default_bone_lengths(skeleton) : spec.bone_lengths;

  // Bone length and rest direction keyed by child joint.
  std::vector<double> bone(joints, 0.0);
  for (std::size_t i = 0; i < skeleton.edges().size(); ++i) {
    const Edge& e = skeleton.edges()[i];
    bone[parent[e.b] == e.a ? e.b : e.a] = lengths[i];
  }
  std::vector<Vec3> rest(joints, Vec3::Zero());
  const bool is_h36m = skeleton == SkeletonGraph::h36m17();
  for (std::size_t j = 1; j < joints; ++j) {
    if (is_h36m) {
      rest[j] = h36m_rest_directions()[j].normalized();
    } else {
      const double angle = 0.35 * static_cast<double>(j % 5) - 0.7;
      rest[j] = Vec3(std::sin(angle), std::cos(angle), 0.15 * static_cast<double>(j % 3) - 0.15)
                    .normalized();
    }
  }
  // Children after parents.
  std::vector<std::size_t> order = {0};
  for (std::size_t k = 0; k < order.size(); ++k) {
    for (std::size_t j = 0; j < joints; ++j) {
      if (j != 0 && parent[j] == order[k]) order.push_back(j);
    }
  }

  Rng rng = Rng(spec.seed).split(static_cast<std::uint64_t>(index));
  Rng motion = rng.split("motion");
  Rng noise = rng.split("noise");
  const std::size_t h = spec.harmonics;
  // Per joint, per axis, per harmonic amplitude and phase.
  std::vector<double> amp(joints * 3 * h), phase(joints * 3 * h);
  for (std::size_t i = 0; i < amp.size(); ++i) {
    amp[i] = spec.amplitude * motion.uniform(0.2, 1.0) / static_cast<double>(h);
    phase[i] = motion.uniform(0.0, 2.0 * std::numbers::pi);
  }
  const double yaw0 = motion.uniform(-std::numbers::pi, std::numbers::pi);
  const double yaw_amp = motion.uniform(0.0, 0.5);
  const double yaw_phase = motion.uniform(0.0, 2.0 * std::numbers::pi);

  const double omega = 2.0 * std::numbers::pi * spec.base_frequency / spec.fps;
  SynthClip clip;
  clip.gt3d = PoseSequence(spec.frames, joints, 3, "mm");
  std::vector<Mat3> global(joints);
  std::vector<Vec3> pos(joints);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const double time = static_cast<double>(t);
    const double yaw = yaw0 + yaw_amp * std::sin(omega * time + yaw_phase);
    global[0] = Eigen::AngleAxisd(yaw, Vec3::UnitY()).toRotationMatrix();
    pos[0] = Vec3::Zero();
    for (std::size_t k = 1; k < order.size(); ++k) {
      const std::size_t j = order[k];
      double angle[3] = {0.0, 0.0, 0.0};
      for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t m = 0; m < h; ++m) {
          const std::size_t i = (j * 3 + a) * h + m;
          angle[a] += amp[i] * std::sin(omega * static_cast<double>(m + 1) * time + phase[i]);
        }
      }
      global[j] = global[parent[j]] * rotation_xyz(angle[0], angle[1], angle[2]);
      pos[j] = pos[parent[j]] + bone[j] * (global[j] * rest[j]);
    }
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < joints; ++a) {
      for (std::size_t b = a + 1; b < joints; ++b) nearest = std::min(nearest, (pos[a] - pos[b]).norm());
    }
    if (nearest < 1.0) {
      throw ConfigError("synth: joints coincide at frame " + std::to_string(t) +
                        "; lower the amplitude");
    }
    for (std::size_t j = 0; j < joints; ++j) {
      // Body frame (y up) to camera frame (y down, z forward).
      clip.gt3d(t, j, 0) = pos[j].x();
      clip.gt3d(t, j, 1) = -pos[j].y();
      clip.gt3d(t, j, 2) = pos[j].z();
    }
  }
  clip.input2d = project_to_normalized(clip.gt3d, spec);
  if (spec.noise_std > 0.0) {
    const double half_width = spec.image_width / 2.0;
    for (double& v : clip.input2d.values) v += spec.noise_std * noise.normal() / half_width;
  }
  return clip;
}

std::vector<std::string> write_synth_set(const SynthSpec& spec, const SkeletonGraph& skeleton,
                                         const std::filesystem::path& out_dir) {
  spec.validate(skeleton.edges().size());
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory " + out_dir.string() + ": " + ec.message());
  std::vector<SynthClip> clips;
  for (std::size_t i = 0; i < spec.clips; ++i) clips.push_back(synth_generate(spec, skeleton, i));
  std::vector<std::string> stems;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const std::string stem = spec.name + "_" + std::to_string(i);
    const std::optional<double> fps = spec.fps;
    save_clip_file(Clip{clips[i].input2d, stem, fps}, out_dir / (stem + ".in2d.clip"));
    save_clip_file(Clip{clips[i].gt3d, stem, fps}, out_dir / (stem + ".gt3d.clip"));
    stems.push_back(stem);
  }
  return stems;
}

}  // namespace ktp::io
