// Acceptance run: one PASS/FAIL line per criterion, detail lines indented.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "../model_fixtures.hpp"
#include "ktp/evaluation.hpp"
#include "ktp/io/checkpoint.hpp"
#include "ktp/io/clip.hpp"
#include "ktp/io/config.hpp"
#include "ktp/io/dataset.hpp"
#include "ktp/model.hpp"
#include "ktp/ops.hpp"
#include "ktp/rng.hpp"
#include "ktp/topology.hpp"
#include "ktp/training.hpp"

namespace fs = std::filesystem;
using namespace ktp;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { details.push_back("info " + what); }
};

std::string num(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

fs::path scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "ktp_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct CommandResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

CommandResult run_command(const std::string& args) {
  const fs::path out = scratch() / "cmd.out";
  const fs::path err = scratch() / "cmd.err";
  const std::string cmd = std::string("\"") + KTP_BIN + "\" " + args + " > \"" + out.string() +
                          "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  CommandResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor random_input(const ModelConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(c.frames * c.joints * 2);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::constant({c.frames, c.joints, 2}, std::move(v));
}

// --- 1 ---------------------------------------------------------------------

Outcome gradient_audit() {
  Outcome o;
  ModelConfig c;
  c.frames = 4;
  c.joints = 5;
  c.channels = 8;
  c.heads = 2;
  c.depth = 1;
  c.mode = WiringMode::kSeparate;
  const auto t0 = Clock::now();
  const GradcheckReport r = gradcheck_model(c, LossWeights{}, 2024, 1e-4);
  const double elapsed = seconds_since(t0);
  double worst = 0.0;
  for (const auto& g : r.groups) worst = std::max(worst, g.max_rel_error);
  o.require(r.passed(), std::to_string(r.groups.size()) + " parameter groups, worst relative error " +
                            num(worst) + " < 1e-4");
  o.require(elapsed < 60.0, "runtime " + num(elapsed) + " s < 60 s");
  return o;
}

// --- 2 ---------------------------------------------------------------------

Outcome topology_algebra() {
  Outcome o;
  Rng rng(31);
  const Tensor spatial = build_spatial_local(SkeletonGraph::h36m17());
  const Tensor temporal = build_temporal_local(27, 1);
  double worst_asym = 0.0;
  double worst_zero = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Tensor& a = trial % 2 == 0 ? spatial : temporal;
    const std::size_t n = a.dim(0);
    std::vector<double> v(n * n);
    const double spread = std::pow(10.0, rng.uniform(-3.0, 3.0));
    for (double& x : v) x = rng.uniform(-spread, spread);
    const Tensor k = combine(a, Tensor::constant({n, n}, std::move(v)));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        worst_asym = std::max(worst_asym, std::abs(k.at({i, j}) - k.at({j, i})));
      }
    }
    const Tensor k0 = combine(a, Tensor::zeros({n, n}));
    worst_zero = std::max(worst_zero, max_abs_diff(k0.values(), a.values()));
  }
  o.require(worst_asym <= 1e-15, "1000 random learnable matrices, max asymmetry " + num(worst_asym));
  o.require(worst_zero == 0.0, "zero learnable matrix returns the local topology, max diff " +
                                   num(worst_zero));
  return o;
}

// --- 3 ---------------------------------------------------------------------

Outcome degradation_identity() {
  Outcome o;
  ModelConfig c = ModelConfig::desk();
  c.frames = 9;
  c.channels = 16;
  c.heads = 2;
  // No bones: the spatial local topology is exactly I.
  std::vector<std::string> names;
  for (std::size_t i = 0; i < c.joints; ++i) names.push_back("j" + std::to_string(i));
  const SkeletonGraph bare(names, {});
  ModelParameters p = init_parameters(c, bare, 77);
  const std::size_t d = c.channels;
  p.kpa.global_affinity = Tensor::parameter({c.joints, c.joints}, std::vector<double>(c.joints * c.joints, 0.0));
  p.kpa.modulation = Tensor::parameter({c.joints, d}, std::vector<double>(c.joints * d, 1.0));
  p.kpa.spatial_pos = Tensor::parameter({c.joints, d}, std::vector<double>(c.joints * d, 0.0));
  p.tpa.temporal_pos = Tensor::parameter({c.frames, d}, std::vector<double>(c.frames * d, 0.0));
  // The temporal band has radius ≥ 1, so A_T = I with Â_T = 0 is realized as
  // a temporal topology whose combined matrix is I.
  const Tensor band = build_temporal_local(c.frames, c.temporal_radius);
  for (auto& block : p.tpa.blocks) {
    std::vector<double> id(d * d, 0.0), recentered(c.frames * c.frames);
    for (std::size_t i = 0; i < d; ++i) id[i * d + i] = 1.0;
    for (std::size_t i = 0; i < c.frames * c.frames; ++i) {
      recentered[i] = (i % (c.frames + 1) == 0 ? 1.0 : 0.0) - band.values()[i];
    }
    block.transform = Tensor::parameter({d, d}, std::move(id));
    block.global_affinity = Tensor::parameter({c.frames, c.frames}, std::move(recentered));
    block.modulation = Tensor::parameter({c.frames, d}, std::vector<double>(c.frames * d, 1.0));
  }
  const Model model(c, bare, std::move(p));
  const Tensor combined_t = combine(band, model.parameters().tpa.blocks[0].global_affinity);
  bool identity = true;
  for (std::size_t i = 0; i < c.frames; ++i) {
    for (std::size_t j = 0; j < c.frames; ++j) identity &= combined_t.at({i, j}) == (i == j ? 1.0 : 0.0);
  }
  o.require(identity, "combined temporal topology is exactly I");

  const Tensor x = random_input(c, 5);
  const Tensor smd = model.forward(x).pred;
  // Plain attention with every prior block reduced to the identity map; the
  // two-block stack keeps its residual, so the temporal stream carries x + x.
  const Tensor plain = test::plain_attention_forward(model, x, 2.0);
  const double diff = max_abs_diff(smd.values(), plain.values());
  o.require(diff <= 1e-12, "SMD vs plain attention (prior blocks as identity maps), max diff " + num(diff));

  const Tensor base = model.forward(x, WiringMode::kBaseline).pred;
  o.note("SMD vs BASELINE on the same weights differs by " +
         num(max_abs_diff(smd.values(), base.values())) + " (residual doubling, transforms=I)");
  ModelParameters zero = clone_parameters(model.parameters(), c);
  for (auto& block : zero.tpa.blocks) {
    block.transform = Tensor::parameter({d, d}, std::vector<double>(d * d, 0.0));
  }
  const Model residual_only(c, bare, std::move(zero));
  const double diff0 = max_abs_diff(residual_only.forward(x).pred.values(),
                                    residual_only.forward(x, WiringMode::kBaseline).pred.values());
  o.note("with transforms=0 SMD vs BASELINE max diff " + num(diff0));
  return o;
}

// --- 4 ---------------------------------------------------------------------

struct OverfitResult {
  bool finite = true;
  std::size_t steps = 0;
  double initial_mpjpe = 0.0;
  double final_mpjpe = 0.0;
  double seconds = 0.0;
};

double training_mpjpe(const Model& model, const TrainingClip& clip) {
  return mpjpe(io::predict_sequence(model, clip.input2d, "mm"), clip.gt3d);
}

OverfitResult overfit(const io::RunConfig& config, const TrainingClip& clip, double target) {
  OverfitResult r;
  const auto t0 = Clock::now();
  Model model = Model::initialize(config.model, SkeletonGraph::h36m17(), config.seed);
  Trainer trainer(model, config.loss, config.adam, config.schedule);
  r.initial_mpjpe = training_mpjpe(model, clip);
  r.final_mpjpe = r.initial_mpjpe;
  const std::vector<TrainingClip> clips{clip};
  for (std::size_t s = 0; s < config.schedule.steps; ++s) {
    const StepLog row = trainer.step(clips);
    r.steps = s + 1;
    if (!std::isfinite(row.loss_total)) {
      r.finite = false;
      break;
    }
    if (r.steps % 25 == 0 || r.steps == config.schedule.steps) {
      r.final_mpjpe = training_mpjpe(model, clip);
      if (!std::isfinite(r.final_mpjpe)) {
        r.finite = false;
        break;
      }
      if (r.final_mpjpe < target) break;
    }
  }
  r.seconds = seconds_since(t0);
  return r;
}

Outcome overfit_check() {
  Outcome o;
  const fs::path dir = fs::path(KTP_DATA_DIR) / "fixtures" / "t27";
  const io::RunConfig config = io::load_run_config(fs::path(KTP_DATA_DIR) / "configs" / "overfit.cfg");
  const auto pairs = io::load_clip_pairs(dir);
  const TrainingClip clip = io::make_training_windows({pairs.front()}, 27, 17).front();

  const SkeletonGraph g = SkeletonGraph::h36m17();
  double bone_sum = 0.0;
  for (const Edge& e : g.edges()) {
    double acc = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = clip.gt3d(0, e.a, c) - clip.gt3d(0, e.b, c);
      acc += d * d;
    }
    bone_sum += std::sqrt(acc);
  }
  const double target = 0.02 * bone_sum / static_cast<double>(g.edges().size());
  o.note("clip " + clip.name + ", target MPJPE < " + num(target) + " mm (2% of mean bone length)");

  const auto t0 = Clock::now();
  io::RunConfig smd = config;
  smd.model.mode = WiringMode::kSeparate;
  const OverfitResult a = overfit(smd, clip, target);
  io::RunConfig base = config;
  base.model.mode = WiringMode::kBaseline;
  const OverfitResult b = overfit(base, clip, target);
  const double total = seconds_since(t0);

  o.require(a.finite && a.final_mpjpe < target,
            "SMD: " + std::to_string(a.steps) + " steps, MPJPE " + num(a.initial_mpjpe) + " -> " +
                num(a.final_mpjpe) + " mm in " + num(a.seconds) + " s");
  o.require(b.finite && b.final_mpjpe < 0.05 * b.initial_mpjpe,
            "BASELINE: " + std::to_string(b.steps) + " steps, MPJPE " + num(b.initial_mpjpe) +
                " -> " + num(b.final_mpjpe) + " mm in " + num(b.seconds) +
                " s (finite, below 5% of its initial error)");
  o.require(a.steps <= 2000 && b.steps <= 2000, "step budget 2000");
  o.require(total < 600.0, "runtime " + num(total) + " s < 600 s");
  return o;
}

// --- 5 ---------------------------------------------------------------------

Outcome mode_matrix() {
  Outcome o;
  const ModelConfig desk = ModelConfig::desk();
  const SkeletonGraph g = SkeletonGraph::h36m17();
  Rng rng(3);
  const Tensor x = random_input(desk, 8);
  std::vector<double> gt(desk.frames * desk.joints * 3);
  for (double& v : gt) v = rng.uniform(-0.4, 0.4);
  const Tensor y = Tensor::constant({desk.frames, desk.joints, 3}, std::move(gt));
  std::map<WiringMode, std::size_t> counts;
  for (WiringMode mode : {WiringMode::kUnited, WiringMode::kParallel, WiringMode::kSeparateOne,
                          WiringMode::kSeparate, WiringMode::kBaseline}) {
    ModelConfig c = desk;
    c.mode = mode;
    Model model = Model::initialize(c, g, 9);
    const LossTerms terms = loss_total(model.forward(x).pred, y, LossWeights{});
    backward(terms.total);
    bool finite = std::isfinite(terms.total.item());
    for (const auto& p : model.named_parameters()) {
      for (double v : p.tensor.grad()) finite &= std::isfinite(v);
    }
    counts[mode] = count_parameters(model.parameters(), c);
    o.require(finite, std::string(mode_name(mode)) + ": loss " + num(terms.total.item()) +
                          ", all gradients finite");
  }
  const std::size_t t = desk.frames, d = desk.channels;
  const std::size_t block = d * d + t * t + t * d;
  o.require(counts[WiringMode::kSeparateOne] + block == counts[WiringMode::kSeparate],
            "SMD-S " + std::to_string(counts[WiringMode::kSeparateOne]) + " = SMD " +
                std::to_string(counts[WiringMode::kSeparate]) + " - one TPA block (" +
                std::to_string(block) + ")");
  return o;
}

// --- 6 ---------------------------------------------------------------------

PoseSequence random_pose(std::size_t t, std::size_t n, Rng& rng) {
  PoseSequence p(t, n, 3);
  for (double& v : p.values) v = rng.uniform(-300.0, 300.0);
  return p;
}

PoseSequence random_similarity(const PoseSequence& p, Rng& rng) {
  double q[4];
  double norm = 0.0;
  for (double& v : q) {
    v = rng.normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  const double w = q[0] / norm, x = q[1] / norm, y = q[2] / norm, z = q[3] / norm;
  const double r[9] = {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
                       2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
                       2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
  const double s = rng.uniform(0.2, 5.0);
  const double tr[3] = {rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3)};
  PoseSequence out = p;
  for (std::size_t f = 0; f < p.frames; ++f) {
    for (std::size_t n = 0; n < p.joints; ++n) {
      for (std::size_t c = 0; c < 3; ++c) {
        out(f, n, c) = s * (r[c * 3] * p(f, n, 0) + r[c * 3 + 1] * p(f, n, 1) + r[c * 3 + 2] * p(f, n, 2)) + tr[c];
      }
    }
  }
  return out;
}

Outcome metric_oracles() {
  Outcome o;
  Rng rng(6);
  std::size_t violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const PoseSequence gt = random_pose(1, 17, rng);
    const PoseSequence pred = random_pose(1, 17, rng);
    if (p_mpjpe(pred, gt) > mpjpe(pred, gt) + 1e-9) ++violations;
  }
  o.require(violations == 0, "p_mpjpe <= mpjpe on 1000 random pairs (" + std::to_string(violations) +
                                 " violations)");
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const PoseSequence gt = random_pose(2, 17, rng);
    const PoseSequence pred = random_pose(2, 17, rng);
    worst = std::max(worst, std::abs(p_mpjpe(random_similarity(pred, rng), gt) - p_mpjpe(pred, gt)));
  }
  o.require(worst <= 1e-9, "p_mpjpe change under random similarity transforms " + num(worst));

  const PoseSequence gt = random_pose(5, 17, rng);
  const PckResult perfect = pck_auc(gt, gt);
  o.require(perfect.pck == 100.0 && perfect.auc == 100.0,
            "perfect predictions: PCK " + num(perfect.pck) + ", AUC " + num(perfect.auc));

  PoseSequence a(1, 2, 3, std::vector<double>{0, 0, 0, 100, 0, 0});
  PoseSequence b = a;
  b(0, 0, 0) += 3.0;
  b(0, 0, 1) += 4.0;
  const double hand = mpjpe(b, a);
  o.require(hand == 2.5, "(3,4,0) offset on one of two joints: MPJPE " + num(hand));
  PoseSequence far = a;
  far(0, 0, 0) += 200.0;
  const double pck = pck_auc(far, a).pck;
  o.require(pck == 50.0, "one of two joints 200 mm off, threshold 150: PCK " + num(pck));
  return o;
}

// --- 7 ---------------------------------------------------------------------

std::vector<std::vector<double>> read_csv_matrix(const fs::path& path) {
  std::vector<std::vector<double>> rows;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

double worst_row_error(const std::vector<std::vector<double>>& rows) {
  double worst = 0.0;
  for (const auto& r : rows) {
    double s = 0.0;
    for (double v : r) s += v;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

Outcome attention_normalization() {
  Outcome o;
  const ModelConfig c = ModelConfig::desk();
  const Model model = Model::initialize(c, SkeletonGraph::h36m17(), 12);
  const fs::path ckpt = scratch() / "attn.ktpf";
  io::save_checkpoint(model, LossWeights{}, ckpt);
  const fs::path clip = fs::path(KTP_DATA_DIR) / "fixtures" / "t27" / "walk27_0.in2d.clip";

  const ForwardRecord record = model.forward(io::load_clip(clip));
  double raw = 0.0;
  for (const Tensor* attn : {&record.attn_spatial, &record.attn_temporal}) {
    const std::size_t s = attn->dim(3);
    const auto v = attn->values();
    for (std::size_t r = 0; r < v.size() / s; ++r) {
      double acc = 0.0;
      for (std::size_t k = 0; k < s; ++k) acc += v[r * s + k];
      raw = std::max(raw, std::abs(acc - 1.0));
    }
  }
  o.require(raw <= 1e-9, "per-head attention rows, max |sum - 1| = " + num(raw));

  const fs::path prefix = scratch() / "attn";
  const CommandResult r = run_command("export-attn --ckpt \"" + ckpt.string() + "\" --clip \"" +
                                      clip.string() + "\" --out-prefix \"" + prefix.string() + "\"");
  o.require(r.exit_code == 0, "export-attn exit code " + std::to_string(r.exit_code));
  if (r.exit_code != 0) return o;
  const auto spatial = read_csv_matrix(prefix.string() + "_spatial.csv");
  const auto temporal = read_csv_matrix(prefix.string() + "_temporal.csv");
  o.require(spatial.size() == c.joints && spatial.front().size() == c.joints &&
                temporal.size() == c.frames && temporal.front().size() == c.frames,
            "exported shapes " + std::to_string(spatial.size()) + "x" + std::to_string(spatial.front().size()) +
                " and " + std::to_string(temporal.size()) + "x" + std::to_string(temporal.front().size()));
  const double worst = std::max(worst_row_error(spatial), worst_row_error(temporal));
  o.require(worst <= 1e-9, "exported head-averaged rows, max |sum - 1| = " + num(worst));
  return o;
}

// --- 8 ---------------------------------------------------------------------

// Closed-form counts written out independently of the library.
std::map<std::string, std::size_t> documented_counts(std::size_t t, std::size_t n, std::size_t d,
                                                     std::size_t l, bool single_tpa) {
  const std::size_t encoder = 4 * d * d + 2 * d + (d * 2 * d + 2 * d) + (2 * d * d + d);
  const std::size_t blocks = single_tpa ? 1 : 2;
  std::map<std::string, std::size_t> m;
  m["kpa"] = 2 * d + n * n + 2 * n * d;
  m["tpa"] = blocks * (d * d + t * t + t * d) + t * d;
  m["entry"] = 2 * encoder;
  m["stack"] = 2 * l * encoder;
  m["head"] = 3 * d + 3;
  m["total"] = m["kpa"] + m["tpa"] + m["entry"] + m["stack"] + m["head"];
  return m;
}

Outcome parameter_accounting() {
  Outcome o;
  struct Case {
    std::size_t t, n, d, h, l;
    const char* mode;
  };
  const std::vector<Case> cases = {{27, 17, 64, 4, 2, "SMD"},   {4, 5, 8, 2, 1, "SMD"},
                                   {81, 17, 256, 8, 4, "SMD"},  {27, 17, 64, 4, 2, "SMD-S"},
                                   {9, 6, 32, 4, 0, "UMD"},     {27, 14, 48, 3, 3, "PMD"},
                                   {243, 17, 512, 8, 7, "SMD"}};
  for (const Case& k : cases) {
    const fs::path cfg = scratch() / "params.cfg";
    std::ofstream(cfg) << "frames = " << k.t << "\njoints = " << k.n << "\nchannels = " << k.d
                       << "\nheads = " << k.h << "\ndepth = " << k.l << "\nmode = " << k.mode << '\n';
    const CommandResult r = run_command("params --config \"" + cfg.string() + "\"");
    std::map<std::string, std::size_t> printed;
    std::stringstream lines(r.out);
    std::string line;
    std::getline(lines, line);
    while (std::getline(lines, line)) {
      const auto comma = line.find(',');
      if (comma != std::string::npos) printed[line.substr(0, comma)] = std::stoull(line.substr(comma + 1));
    }
    const auto expected = documented_counts(k.t, k.n, k.d, k.l, std::string(k.mode) == "SMD-S");
    bool match = r.exit_code == 0;
    for (const auto& [key, value] : expected) match &= printed.count(key) && printed[key] == value;
    std::ostringstream label;
    label << "T=" << k.t << " N=" << k.n << " d=" << k.d << " h=" << k.h << " L=" << k.l << " "
          << k.mode << ": total " << printed["total"] << " (formula " << expected.at("total") << ")";
    o.require(match, label.str());
  }
  const auto full = documented_counts(243, 17, 512, 7, false);
  o.require(full.at("kpa") == 2 * 512 + 17 * 17 + 2 * 17 * 512,
            "KPA increment at full size " + std::to_string(full.at("kpa")) + " = 2d + N^2 + 2Nd");
  return o;
}

// --- 9 ---------------------------------------------------------------------

Outcome determinism() {
  Outcome o;
  const fs::path cfg = scratch() / "determinism.cfg";
  io::RunConfig c = io::load_run_config(fs::path(KTP_DATA_DIR) / "configs" / "desk.cfg");
  c.skeleton = (fs::path(KTP_DATA_DIR) / "h36m17.skel").string();
  c.schedule.steps = 12;
  c.schedule.batch_size = 2;
  c.seed = 42;
  io::save_run_config(c, cfg);
  const std::string clips = (fs::path(KTP_DATA_DIR) / "fixtures" / "t27").string();
  std::vector<std::string> ckpt, log, opt;
  for (int run = 0; run < 2; ++run) {
    const fs::path out = scratch() / ("det" + std::to_string(run) + ".ktpf");
    const CommandResult r = run_command("train --quiet --config \"" + cfg.string() + "\" --clips \"" +
                                        clips + "\" --out \"" + out.string() + "\"");
    o.require(r.exit_code == 0, "train run " + std::to_string(run + 1) + " exit code " +
                                    std::to_string(r.exit_code));
    ckpt.push_back(slurp(out));
    log.push_back(slurp(out.string() + ".log.csv"));
    opt.push_back(slurp(out.string() + ".opt"));
  }
  o.require(!ckpt[0].empty() && ckpt[0] == ckpt[1],
            "checkpoints bit-identical (" + std::to_string(ckpt[0].size()) + " bytes)");
  o.require(!log[0].empty() && log[0] == log[1], "loss logs bit-identical");
  o.require(!opt[0].empty() && opt[0] == opt[1], "optimizer states bit-identical");
  return o;
}

// --- 10 --------------------------------------------------------------------

Outcome format_round_trips() {
  Outcome o;
  bool clips_ok = true;
  for (const auto& entry : fs::directory_iterator(fs::path(KTP_DATA_DIR) / "fixtures" / "t27")) {
    const io::Clip clip = io::load_clip_file(entry.path());
    const fs::path copy = scratch() / entry.path().filename();
    io::save_clip_file(clip, copy);
    clips_ok &= slurp(copy) == slurp(entry.path()) && io::load_clip_file(copy).pose == clip.pose;
  }
  Rng rng(10);
  PoseSequence random(7, 17, 3, "m");
  for (double& v : random.values) v = rng.normal() * std::pow(10.0, rng.uniform(-8.0, 8.0));
  io::save_clip(random, scratch() / "random.clip");
  const PoseSequence back = io::load_clip(scratch() / "random.clip");
  bool bitwise = back.values.size() == random.values.size();
  for (std::size_t i = 0; bitwise && i < random.values.size(); ++i) {
    bitwise = std::bit_cast<std::uint64_t>(back.values[i]) == std::bit_cast<std::uint64_t>(random.values[i]);
  }
  o.require(clips_ok && bitwise, "clip files: shipped fixtures and random payloads round-trip bitwise");

  bool configs_ok = true;
  for (const char* name : {"desk.cfg", "tiny.cfg", "full.cfg", "overfit.cfg"}) {
    const io::RunConfig c = io::load_run_config(fs::path(KTP_DATA_DIR) / "configs" / name);
    const std::string text = io::format_run_config(c);
    const io::RunConfig again = io::parse_run_config(text);
    configs_ok &= again == c && io::format_run_config(again) == text;
  }
  o.require(configs_ok, "config files: parse -> format -> parse is a fixed point");

  bool ckpt_ok = true;
  for (WiringMode mode : {WiringMode::kSeparate, WiringMode::kSeparateOne, WiringMode::kBaseline}) {
    ModelConfig c = ModelConfig::desk();
    c.mode = mode;
    const Model model = Model::initialize(c, SkeletonGraph::h36m17(), 4);
    const fs::path path = scratch() / "round.ktpf";
    io::save_checkpoint(model, LossWeights{}, path);
    const std::string bytes = slurp(path);
    const io::Checkpoint ck = io::load_checkpoint(path);
    ckpt_ok &= io::encode_checkpoint(ck.config, ck.params, LossWeights{}) == bytes && ck.config == c;
    const auto a = model.named_parameters();
    const auto b = enumerate_parameters(ck.params, ck.config);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto va = a[i].tensor.values();
      const auto vb = b[i].tensor.values();
      ckpt_ok &= std::equal(va.begin(), va.end(), vb.begin(), vb.end(), [](double x, double y) {
        return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
      });
    }
  }
  o.require(ckpt_ok, "checkpoints: save -> load -> save is byte-identical for SMD, SMD-S, BASELINE");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient audit", gradient_audit},
      {"topology algebra", topology_algebra},
      {"degradation identity", degradation_identity},
      {"overfit check", overfit_check},
      {"mode matrix", mode_matrix},
      {"metric oracles", metric_oracles},
      {"attention normalization", attention_normalization},
      {"parameter accounting", parameter_accounting},
      {"determinism", determinism},
      {"format round-trips", format_round_trips},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << " ("
              << num(seconds_since(t0)) << " s)\n";
    for (const auto& d : o.details) std::cout << "    " << d << '\n';
    std::cout << std::flush;
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
