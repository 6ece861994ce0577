#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "doctest.h"
#include "ktp/error.hpp"
#include "ktp/io/checkpoint.hpp"
#include "ktp/io/clip.hpp"
#include "ktp/io/config.hpp"
#include "ktp/io/dataset.hpp"
#include "ktp/io/synth.hpp"
#include "ktp/ops.hpp"
#include "support.hpp"

using namespace ktp;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ktp_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("clip text round trip is bitwise") {
  Rng rng(1);
  PoseSequence p(3, 4, 3, ktp::test::random_values(36, rng, -1e3, 1e3), "mm");
  p.values[0] = 1e-300;
  p.values[1] = -0.0;
  p.values[2] = 123456789.123456789;
  const io::Clip clip{p, "walk_01", 50.0};
  const std::string text = io::format_clip(clip);
  const io::Clip back = io::parse_clip(text);
  CHECK(back.name == "walk_01");
  CHECK(back.fps.value() == 50.0);
  CHECK(back.pose.unit == "mm");
  CHECK(back.pose.shape() == p.shape());
  CHECK(bitwise_equal(back.pose.values, p.values));
  CHECK(io::format_clip(back) == text);

  const fs::path dir = scratch_dir("clip");
  io::save_clip(p, dir / "a.clip");
  CHECK(bitwise_equal(io::load_clip(dir / "a.clip").values, p.values));
}

TEST_CASE("clip parse errors") {
  CHECK_THROWS_AS(io::parse_clip("ktp-clap v1 1 1 2 norm\n0 0\n"), ParseError);
  CHECK_THROWS_AS(io::parse_clip("ktp-clip v9 1 1 2 norm\n0 0\n"), ParseError);
  CHECK_THROWS_AS(io::parse_clip("ktp-clip v1 1 1 4 norm\n0 0 0 0\n"), ParseError);
  CHECK_THROWS_AS(io::parse_clip("ktp-clip v1 1 1 2 furlong\n0 0\n"), ParseError);
  CHECK_THROWS_AS(io::parse_clip("ktp-clip v1 1 1 2 norm\n0 nan\n"), ParseError);
  CHECK_THROWS_AS(io::parse_clip("ktp-clip v1 1 1 2 norm\n0 0 0\n"), ParseError);
  CHECK_THROWS_AS(io::parse_clip("ktp-clip v1 1 1 2 norm\n0 0\n1 1\n"), ParseError);

  const std::string truncated = "ktp-clip v1 2 2 2 norm\n0 0\n1 1\n2 2\n";
  try {
    io::parse_clip(truncated);
    FAIL("expected a parse error");
  } catch (const ParseError& err) {
    const std::string msg = err.what();
    CHECK(msg.find("expected 4") != std::string::npos);
    CHECK(msg.find("found 3") != std::string::npos);
    CHECK(err.offset() == truncated.size());
  }
  CHECK_THROWS_AS(io::load_clip("/nonexistent/dir/x.clip"), IoError);
}

TEST_CASE("run config round trip") {
  io::RunConfig c;
  c.model.mode = WiringMode::kParallel;
  c.model.temporal_radius = 2;
  c.model.tpa_global = false;
  c.loss.joint_weights = std::vector<double>(17, 1.0);
  c.loss.joint_weights[3] = 1.5;
  c.loss.lambda_t = 0.3;
  c.adam.lr = 1e-3;
  c.schedule.steps = 17;
  c.schedule.steps_per_epoch = 5;
  c.seed = 123;
  c.skeleton = "../data/h36m17.skel";
  const std::string text = io::format_run_config(c);
  const io::RunConfig back = io::parse_run_config(text);
  CHECK(back == c);
  CHECK(io::format_run_config(back) == text);
  CHECK(io::parse_run_config(io::format_run_config(io::RunConfig{})) == io::RunConfig{});

  const io::RunConfig partial = io::parse_run_config("# comment\nframes = 9\n\nmode = SMD-S  # inline\n");
  CHECK(partial.model.frames == 9);
  CHECK(partial.model.mode == WiringMode::kSeparateOne);
  CHECK(partial.model.channels == 64);
}

TEST_CASE("run config errors") {
  CHECK_THROWS_AS(io::parse_run_config("frames = 9\nbogus = 1\n"), ParseError);
  CHECK_THROWS_AS(io::parse_run_config("frames = nine\n"), ParseError);
  CHECK_THROWS_AS(io::parse_run_config("frames = 9\nframes = 10\n"), ParseError);
  CHECK_THROWS_AS(io::parse_run_config("mode = XMD\n"), ParseError);
  CHECK_THROWS_AS(io::parse_run_config("frames 9\n"), ParseError);
  CHECK_THROWS_AS(io::parse_run_config("kpa_global = maybe\n"), ParseError);
  try {
    io::parse_run_config("frames = 9\nlr = fast\n");
    FAIL("expected a parse error");
  } catch (const ParseError& err) {
    CHECK(err.offset() == 11);
  }
  io::RunConfig bad;
  bad.model.heads = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("seed override from the environment") {
  io::RunConfig c;
  c.seed = 5;
  ::unsetenv("KTP_SEED");
  CHECK_FALSE(io::apply_seed_override(c));
  ::setenv("KTP_SEED", "77", 1);
  CHECK(io::apply_seed_override(c));
  CHECK(c.seed == 77);
  ::setenv("KTP_SEED", "x", 1);
  CHECK_THROWS_AS(io::apply_seed_override(c), ParseError);
  ::unsetenv("KTP_SEED");
}

TEST_CASE("checkpoint round trip is bitwise") {
  for (WiringMode mode : {WiringMode::kSeparate, WiringMode::kSeparateOne}) {
    ModelConfig c = ModelConfig::tiny();
    c.mode = mode;
    c.temporal_radius = 2;
    const SkeletonGraph g = SkeletonGraph::default_for(c.joints);
    const Model model = Model::initialize(c, g, 42);
    LossWeights w;
    w.lambda_t = 0.25;
    w.lambda_m = 0.5;
    const std::string bytes = io::encode_checkpoint(c, model.parameters(), w);
    const io::Checkpoint ck = io::decode_checkpoint(bytes, g);
    CHECK(ck.config.frames == c.frames);
    CHECK(ck.config.mode == mode);
    CHECK(ck.config.temporal_radius == 2);
    CHECK(ck.lambda_t == 0.25);
    CHECK(ck.lambda_m == 0.5);
    CHECK(io::encode_checkpoint(ck.config, ck.params, w) == bytes);
    const auto a = enumerate_parameters(model.parameters(), c);
    const auto b = enumerate_parameters(ck.params, ck.config);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::equal(a[i].tensor.values().begin(), a[i].tensor.values().end(),
                       b[i].tensor.values().begin()));
    }
    CHECK(bytes.substr(0, 4) == "KTPF");
  }
  const fs::path dir = scratch_dir("ckpt");
  const ModelConfig c = ModelConfig::tiny();
  const Model model = Model::initialize(c, SkeletonGraph::default_for(c.joints), 1);
  io::save_checkpoint(model, LossWeights{}, dir / "m.ktpf");
  const io::Checkpoint ck = io::load_checkpoint(dir / "m.ktpf");
  CHECK(io::encode_checkpoint(ck.config, ck.params, LossWeights{}) ==
        io::read_binary_file(dir / "m.ktpf"));
}

TEST_CASE("checkpoint layout") {
  const ModelConfig c = ModelConfig::tiny();
  const Model model = Model::initialize(c, SkeletonGraph::default_for(c.joints), 1);
  const std::string bytes = io::encode_checkpoint(c, model.parameters(), LossWeights{});
  std::size_t expected = 4 + 4 + 7 * 4 + 2 * 8;
  for (const auto& p : model.named_parameters()) expected += 8 + 8 * p.tensor.size();
  CHECK(bytes.size() == expected);
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);
  CHECK(static_cast<unsigned char>(bytes[8]) == c.frames);
  CHECK(static_cast<unsigned char>(bytes[28]) == static_cast<unsigned>(c.mode));
}

TEST_CASE("checkpoint errors") {
  const ModelConfig c = ModelConfig::tiny();
  const Model model = Model::initialize(c, SkeletonGraph::default_for(c.joints), 1);
  const std::string bytes = io::encode_checkpoint(c, model.parameters(), LossWeights{});
  CHECK_THROWS_AS(io::decode_checkpoint("KTPX" + bytes.substr(4)), ParseError);
  std::string bad_version = bytes;
  bad_version[4] = 2;
  CHECK_THROWS_AS(io::decode_checkpoint(bad_version), ParseError);
  CHECK_THROWS_AS(io::decode_checkpoint(bytes.substr(0, bytes.size() - 8)), ParseError);
  CHECK_THROWS_AS(io::decode_checkpoint(bytes + "x"), ParseError);
  std::string bad_mode = bytes;
  bad_mode[28] = 9;
  CHECK_THROWS_AS(io::decode_checkpoint(bad_mode), ParseError);
  CHECK_THROWS_AS(io::decode_checkpoint(bytes, SkeletonGraph::chain(7)), ConfigError);
}

TEST_CASE("optimizer state round trip is bitwise") {
  const ModelConfig c = ModelConfig::tiny();
  Model model = Model::initialize(c, SkeletonGraph::default_for(c.joints), 1);
  Rng rng(2);
  const Tensor x = ktp::test::random_constant({c.frames, c.joints, 2}, rng);
  backward(ktp::test::weighted_sum(model.forward(x).pred));
  auto params = model.named_parameters();
  OptimizerState state = OptimizerState::create(params, AdamSettings{});
  adam_step(params, state, 1e-3);
  adam_step(params, state, 1e-3);
  const std::string bytes = io::encode_optimizer(state);
  const OptimizerState back = io::decode_optimizer(bytes);
  CHECK(back == state);
  CHECK(io::encode_optimizer(back) == bytes);
  CHECK_THROWS_AS(io::decode_optimizer(bytes.substr(0, bytes.size() / 2)), ParseError);
  CHECK_THROWS_AS(io::decode_optimizer("KTPF" + bytes.substr(4)), ParseError);
}

TEST_CASE("synthetic clips") {
  io::SynthSpec spec;
  spec.seed = 3;
  spec.frames = 40;
  const SkeletonGraph g = SkeletonGraph::h36m17();
  const io::SynthClip a = io::synth_generate(spec, g, 0);
  const io::SynthClip b = io::synth_generate(spec, g, 0);
  CHECK(a.gt3d == b.gt3d);
  CHECK(a.input2d == b.input2d);
  CHECK_FALSE(io::synth_generate(spec, g, 1).gt3d == a.gt3d);
  CHECK(a.gt3d.shape() == Shape{40, 17, 3});
  CHECK(a.input2d.shape() == Shape{40, 17, 2});
  CHECK(a.gt3d.unit == "mm");

  const io::SynthClip reprojected_src = io::synth_generate(spec, g, 2);
  CHECK(io::project_to_normalized(reprojected_src.gt3d, spec) == reprojected_src.input2d);

  const auto lengths = io::default_bone_lengths(g);
  for (std::size_t e = 0; e < g.edges().size(); ++e) {
    const Edge& edge = g.edges()[e];
    for (std::size_t t = 0; t < spec.frames; ++t) {
      double acc = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        const double d = a.gt3d(t, edge.a, c) - a.gt3d(t, edge.b, c);
        acc += d * d;
      }
      CHECK(std::abs(std::sqrt(acc) - lengths[e]) <= 1e-9);
    }
  }
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t c = 0; c < 3; ++c) CHECK(a.gt3d(t, 0, c) == 0.0);
  }

  io::SynthSpec noisy = spec;
  noisy.noise_std = 2.0;
  const io::SynthClip n = io::synth_generate(noisy, g, 0);
  CHECK(n.gt3d == a.gt3d);
  CHECK_FALSE(n.input2d == a.input2d);
  const double dev = ktp::test::max_abs_diff(n.input2d.values, a.input2d.values) * 500.0;
  CHECK(dev < 20.0);
}

TEST_CASE("synth spec validation and round trip") {
  io::SynthSpec spec;
  spec.bone_lengths = std::vector<double>(16, 250.0);
  spec.noise_std = 1.5;
  spec.clips = 3;
  const std::string text = io::format_synth_spec(spec);
  CHECK(io::parse_synth_spec(text) == spec);
  CHECK_THROWS_AS(io::parse_synth_spec("nope = 1\n"), ParseError);

  io::SynthSpec bad = spec;
  bad.bone_lengths[2] = -1.0;
  CHECK_THROWS_AS(bad.validate(16), ConfigError);
  bad = spec;
  bad.amplitude = 2.0;
  CHECK_THROWS_AS(bad.validate(16), ConfigError);
  bad = spec;
  bad.bone_lengths.pop_back();
  CHECK_THROWS_AS(bad.validate(16), ConfigError);
  bad = io::SynthSpec{};
  bad.camera_distance = 100.0;
  CHECK_THROWS_AS(io::synth_generate(bad, SkeletonGraph::h36m17()), ConfigError);

  CHECK(io::synth_skeleton(io::SynthSpec{}) == SkeletonGraph::h36m17());
  io::SynthSpec chain;
  chain.skeleton = "chain6";
  CHECK(io::synth_skeleton(chain).joint_count() == 6);
  const auto c6 = io::synth_generate(chain, io::synth_skeleton(chain));
  CHECK(c6.gt3d.joints == 6);
}

TEST_CASE("synth set files") {
  const fs::path dir = scratch_dir("synth");
  io::SynthSpec spec;
  spec.clips = 2;
  spec.frames = 5;
  spec.name = "demo";
  const auto stems = io::write_synth_set(spec, SkeletonGraph::h36m17(), dir);
  REQUIRE(stems.size() == 2);
  const io::Clip in = io::load_clip_file(dir / "demo_1.in2d.clip");
  const io::Clip gt = io::load_clip_file(dir / "demo_1.gt3d.clip");
  CHECK(in.name == "demo_1");
  CHECK(in.pose.unit == "norm");
  CHECK(gt.pose == io::synth_generate(spec, SkeletonGraph::h36m17(), 1).gt3d);
}

TEST_CASE("clip windows") {
  CHECK(io::window_starts(27, 27) == std::vector<std::size_t>{0});
  CHECK(io::window_starts(243, 27).size() == 9);
  CHECK(io::window_starts(30, 27) == std::vector<std::size_t>{0, 3});
  CHECK(io::window_starts(60, 27) == std::vector<std::size_t>{0, 27, 33});
  CHECK_THROWS_AS(io::window_starts(5, 27), ConfigError);

  const ModelConfig c = ModelConfig::tiny();
  const Model model = Model::initialize(c, SkeletonGraph::default_for(c.joints), 3);
  Rng rng(8);
  const std::size_t length = 2 * c.frames + 1;
  const PoseSequence seq(length, c.joints, 2, ktp::test::random_values(length * c.joints * 2, rng));
  const PoseSequence pred = io::predict_sequence(model, seq, "mm");
  CHECK(pred.shape() == Shape{length, c.joints, 3});
  const PoseSequence first = PoseSequence::from_tensor(
      model.forward(io::slice_frames(seq, 0, c.frames)).pred, "m");
  for (std::size_t k = 0; k < c.frames * c.joints * 3; ++k) {
    CHECK(pred.values[k] == first.values[k] * 1000.0);
  }
  const PoseSequence last = PoseSequence::from_tensor(
      model.forward(io::slice_frames(seq, length - c.frames, c.frames)).pred, "m");
  CHECK(pred.values.back() == last.values.back() * 1000.0);

  io::ClipPair pair{"p", {seq, "p", {}}, {PoseSequence(length, c.joints, 3), "p", {}}};
  const auto windows = io::make_training_windows({pair}, c.frames, c.joints);
  CHECK(windows.size() == 3);
  CHECK(windows[2].name == "p@" + std::to_string(length - c.frames));
  CHECK_THROWS_AS(io::make_training_windows({pair}, c.frames, c.joints + 1), ConfigError);
}
