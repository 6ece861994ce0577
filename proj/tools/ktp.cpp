#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ktp/error.hpp"
#include "ktp/evaluation.hpp"
#include "ktp/io/checkpoint.hpp"
#include "ktp/io/clip.hpp"
#include "ktp/io/config.hpp"
#include "ktp/io/dataset.hpp"
#include "ktp/io/synth.hpp"
#include "ktp/log.hpp"
#include "ktp/model.hpp"
#include "ktp/training.hpp"

namespace fs = std::filesystem;
using namespace ktp;

namespace {

std::string one_line(std::string text) {
  for (char& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

int report_error(const std::string& kind, ExitCode code, const std::string& message) {
  std::cerr << "ktp: error kind=" << kind << " exit=" << static_cast<int>(code)
            << " message=" << one_line(message) << '\n';
  return static_cast<int>(code);
}

io::RunConfig load_config(const fs::path& path) {
  io::RunConfig config = io::load_run_config(path);
  io::apply_seed_override(config);
  config.validate();
  return config;
}

fs::path parent_of(const fs::path& path) {
  const fs::path parent = path.parent_path();
  return parent.empty() ? fs::path(".") : parent;
}

void require_output_dir(const fs::path& file) {
  const fs::path dir = parent_of(file);
  if (!fs::is_directory(dir)) throw IoError("output directory does not exist: " + dir.string());
}

SkeletonGraph skeleton_for(const std::string& path, std::size_t joints) {
  if (path.empty()) return SkeletonGraph::default_for(joints);
  SkeletonGraph g = load_skeleton(path);
  if (g.joint_count() != joints) {
    throw ConfigError("skeleton " + path + " has " + std::to_string(g.joint_count()) +
                      " joints, expected " + std::to_string(joints));
  }
  return g;
}

Model load_model(const fs::path& ckpt, const std::string& skeleton_path) {
  const std::string bytes = io::read_binary_file(ckpt);
  io::Checkpoint peek = io::decode_checkpoint(bytes);
  if (skeleton_path.empty()) {
    return Model(peek.config, SkeletonGraph::default_for(peek.config.joints), std::move(peek.params));
  }
  const SkeletonGraph g = skeleton_for(skeleton_path, peek.config.joints);
  io::Checkpoint ck = io::decode_checkpoint(bytes, g);
  return Model(ck.config, g, std::move(ck.params));
}

double millimeters_per_unit(const std::string& unit) {
  if (unit != "mm" && unit != "m") throw ConfigError("metrics need 3D clips in mm or m, got " + unit);
  return unit_to_meters(unit) * 1000.0;
}

PoseSequence to_millimeters(PoseSequence seq) {
  const double f = millimeters_per_unit(seq.unit);
  if (f != 1.0) {
    for (double& v : seq.values) v *= f;
  }
  seq.unit = "mm";
  return seq;
}

std::string matrix_csv(const std::vector<double>& values, std::size_t n) {
  std::ostringstream out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j > 0) out << ',';
      out << io::format_real(values[i * n + j]);
    }
    out << '\n';
  }
  return out.str();
}

void write_text(const fs::path& path, const std::string& text) {
  io::write_binary_file(path, text);
}

// --- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string spec;
  std::string out;
};

int run_synth(const SynthArgs& args) {
  io::SynthSpec spec = io::load_synth_spec(args.spec);
  if (const auto seed = io::seed_override()) spec.seed = *seed;
  const SkeletonGraph skeleton = io::synth_skeleton(spec, parent_of(args.spec));
  spec.validate(skeleton.edges().size());
  if (!fs::is_directory(args.out)) throw IoError("output directory does not exist: " + args.out);
  for (const std::string& stem : io::write_synth_set(spec, skeleton, args.out)) {
    std::cout << stem << '\n';
  }
  return 0;
}

// --- train ---------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string clips;
  std::string out;
  std::string log;
  std::string optimizer;
  bool quiet = false;
};

int run_train(const TrainArgs& args) {
  const io::RunConfig config = load_config(args.config);
  const SkeletonGraph skeleton = io::resolve_skeleton(config, parent_of(args.config));
  const auto pairs = io::load_clip_pairs(args.clips);
  const auto clips = io::make_training_windows(pairs, config.model.frames, config.model.joints);
  const fs::path log_path = args.log.empty() ? fs::path(args.out + ".log.csv") : fs::path(args.log);
  const fs::path opt_path =
      args.optimizer.empty() ? fs::path(args.out + ".opt") : fs::path(args.optimizer);
  require_output_dir(args.out);
  require_output_dir(log_path);
  require_output_dir(opt_path);

  Model model = Model::initialize(config.model, skeleton, config.seed);
  Trainer trainer(model, config.loss, config.adam, config.schedule);
  std::string log = training_log_header() + "\n";
  const std::size_t every = std::max<std::size_t>(1, config.schedule.steps / 20);
  trainer.run(clips, [&](const StepLog& row) {
    log += training_log_row(row) + "\n";
    if (!args.quiet && (row.step % every == 0 || row.step + 1 == config.schedule.steps)) {
      std::cout << "step " << row.step << " loss " << row.loss_total << '\n' << std::flush;
    }
  });

  double error_sum = 0.0;
  std::size_t frames = 0;
  for (const auto& clip : clips) {
    const PoseSequence pred = io::predict_sequence(model, clip.input2d, "mm");
    error_sum += mpjpe(pred, to_millimeters(clip.gt3d)) * static_cast<double>(clip.gt3d.frames);
    frames += clip.gt3d.frames;
  }

  io::save_checkpoint(model, config.loss, args.out);
  io::save_optimizer(trainer.state(), opt_path);
  write_text(log_path, log);
  std::cout << "train_mpjpe_mm " << error_sum / static_cast<double>(frames) << '\n';
  return 0;
}

// --- eval ----------------------------------------------------------------

struct EvalArgs {
  std::string ckpt;
  std::string pred;
  std::string clips;
  std::string report;
  std::string joints_report;
  std::string skeleton;
  bool allow_reflection = false;
  double pck_threshold = 150.0;
};

int run_eval(const EvalArgs& args) {
  if (args.ckpt.empty() == args.pred.empty()) {
    throw ConfigError("eval needs exactly one of --ckpt or --pred");
  }
  const auto pairs = io::load_clip_pairs(args.clips);
  require_output_dir(args.report);
  if (!args.joints_report.empty()) require_output_dir(args.joints_report);
  std::optional<Model> model;
  std::vector<PoseSequence> predictions;
  if (!args.ckpt.empty()) {
    model.emplace(load_model(args.ckpt, args.skeleton));
    for (const auto& pair : pairs) {
      if (pair.input2d.pose.joints != model->config().joints) {
        throw ConfigError(pair.stem + ": joint count does not match the checkpoint");
      }
      io::window_starts(pair.input2d.pose.frames, model->config().frames);
    }
  } else {
    for (const auto& pair : pairs) {
      const fs::path path = fs::path(args.pred) / (pair.stem + ".pred3d.clip");
      PoseSequence pred = io::load_clip(path);
      if (pred.shape() != pair.gt3d.pose.shape()) {
        throw ShapeError(path.string() + ": shape " + shape_string(pred.shape()) +
                         " does not match ground truth " + shape_string(pair.gt3d.pose.shape()));
      }
      predictions.push_back(to_millimeters(std::move(pred)));
    }
  }
  for (const auto& pair : pairs) millimeters_per_unit(pair.gt3d.pose.unit);

  EvaluationOptions options;
  options.procrustes.allow_reflection = args.allow_reflection;
  options.pck.threshold = args.pck_threshold;
  std::vector<MetricReport> reports;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const PoseSequence gt = to_millimeters(pairs[i].gt3d.pose);
    const PoseSequence pred =
        model ? io::predict_sequence(*model, pairs[i].input2d.pose, "mm") : predictions[i];
    reports.push_back(evaluate(pred, gt, options));
  }
  const MetricReport pooled = pool_reports(reports);
  write_text(args.report, format_metric_csv(pooled));
  if (!args.joints_report.empty()) {
    const std::size_t joints = pairs.front().gt3d.pose.joints;
    const SkeletonGraph names = model ? model->skeleton() : skeleton_for(args.skeleton, joints);
    write_text(args.joints_report, format_joint_csv(pooled, names.joint_names()));
  }
  std::cout << format_metric_csv(pooled);
  return 0;
}

// --- gradcheck -------------------------------------------------------------

struct GradcheckArgs {
  std::string config;
  double tolerance = 1e-4;
  double step = 1e-6;
};

int run_gradcheck(const GradcheckArgs& args) {
  const io::RunConfig config = load_config(args.config);
  if (!(args.tolerance > 0.0) || !(args.step > 0.0)) {
    throw ConfigError("--tol and --step must be positive");
  }
  const GradcheckReport report =
      gradcheck_model(config.model, config.loss, config.seed, args.tolerance, args.step);
  std::cout << "group,entries,max_rel_error,status\n";
  for (const auto& g : report.groups) {
    std::cout << g.name << ',' << g.entries << ',' << io::format_real(g.max_rel_error) << ','
              << (g.passed ? "ok" : "FAIL") << '\n';
  }
  if (!report.passed()) {
    throw NumericalError("gradient check failed at tolerance " + io::format_real(args.tolerance));
  }
  return 0;
}

// --- export-attn -----------------------------------------------------------

struct ExportArgs {
  std::string ckpt;
  std::string clip;
  std::string out_prefix;
  std::string skeleton;
  std::vector<std::size_t> joints;
};

int run_export(const ExportArgs& args) {
  const Model model = load_model(args.ckpt, args.skeleton);
  const PoseSequence input = io::load_clip(args.clip);
  const ModelConfig& c = model.config();
  if (input.dims != 2 || input.joints != c.joints) {
    throw ShapeError(args.clip + ": expected T x " + std::to_string(c.joints) + " x 2, got " +
                     shape_string(input.shape()));
  }
  io::window_starts(input.frames, c.frames);
  for (std::size_t j : args.joints) {
    if (j >= c.joints) throw ConfigError("--joints index " + std::to_string(j) + " out of range");
  }
  const fs::path spatial = args.out_prefix + "_spatial.csv";
  const fs::path temporal = args.out_prefix + "_temporal.csv";
  require_output_dir(spatial);

  const ForwardRecord record = model.forward(io::slice_frames(input, 0, c.frames));
  const AttentionMaps maps = extract_attention(record, args.joints);
  write_text(spatial, matrix_csv(maps.spatial, maps.joints));
  write_text(temporal, matrix_csv(maps.temporal, maps.frames));
  std::cout << spatial.string() << '\n' << temporal.string() << '\n';
  return 0;
}

// --- params ----------------------------------------------------------------

struct ParamsArgs {
  std::string config;
  bool list = false;
};

int run_params(const ParamsArgs& args) {
  const io::RunConfig config = load_config(args.config);
  const ParameterBreakdown b = analytic_parameter_count(config.model);
  const ModelParameters params =
      init_parameters(config.model, SkeletonGraph::default_for(config.model.joints), config.seed);
  const std::size_t enumerated = count_parameters(params, config.model);
  if (enumerated != b.total()) {
    throw NumericalError("enumerated parameter count " + std::to_string(enumerated) +
                         " disagrees with the analytic count " + std::to_string(b.total()));
  }
  std::cout << "group,count\n"
            << "kpa," << b.kpa << '\n'
            << "tpa," << b.tpa << '\n'
            << "entry," << b.entry << '\n'
            << "stack," << b.stack << '\n'
            << "head," << b.head << '\n'
            << "total," << b.total() << '\n'
            << "flops," << count_flops(config.model) << '\n';
  if (args.list) {
    std::cout << "array,group,shape,trainable\n";
    for (const auto& p : enumerate_parameters(params, config.model)) {
      std::cout << p.name << ',' << p.group << ',' << shape_string(p.tensor.shape()) << ','
                << (p.trainable ? 1 : 0) << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ktp: 2D-to-3D pose lifting with kinematic and trajectory priors"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ktp 1.0.0");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write synthetic clip pairs");
  synth_cmd->add_option("--spec", synth.spec, "Synth spec file")->required();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a clip directory");
  train_cmd->add_option("--config", train.config, "Run config file")->required();
  train_cmd->add_option("--clips", train.clips, "Directory of *.in2d.clip / *.gt3d.clip pairs")->required();
  train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
  train_cmd->add_option("--log", train.log, "Loss log CSV (default <out>.log.csv)");
  train_cmd->add_option("--optimizer", train.optimizer, "Optimizer state (default <out>.opt)");
  train_cmd->add_flag("--quiet", train.quiet, "No progress lines");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate predictions against ground truth");
  eval_cmd->add_option("--ckpt", eval.ckpt, "Checkpoint to run on the 2D inputs");
  eval_cmd->add_option("--pred", eval.pred, "Directory of <stem>.pred3d.clip predictions");
  eval_cmd->add_option("--clips", eval.clips, "Directory of clip pairs")->required();
  eval_cmd->add_option("--report", eval.report, "Metric CSV output")->required();
  eval_cmd->add_option("--joints-report", eval.joints_report, "Per-joint CSV output");
  eval_cmd->add_option("--skeleton", eval.skeleton, "Skeleton file (default layout for N)");
  eval_cmd->add_flag("--allow-reflection", eval.allow_reflection, "Permit reflections in Procrustes");
  eval_cmd->add_option("--pck-threshold", eval.pck_threshold, "PCK threshold in mm");

  GradcheckArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference audit of every parameter group");
  grad_cmd->add_option("--config", grad.config, "Run config file")->required();
  grad_cmd->add_option("--tol", grad.tolerance, "Relative error tolerance");
  grad_cmd->add_option("--step", grad.step, "Central difference step");

  ExportArgs exp;
  auto* exp_cmd = app.add_subcommand("export-attn", "Write head-averaged attention maps as CSV");
  exp_cmd->add_option("--ckpt", exp.ckpt, "Checkpoint")->required();
  exp_cmd->add_option("--clip", exp.clip, "2D input clip (first window is used)")->required();
  exp_cmd->add_option("--out-prefix", exp.out_prefix, "Writes <prefix>_spatial.csv and <prefix>_temporal.csv")
      ->required();
  exp_cmd->add_option("--skeleton", exp.skeleton, "Skeleton file (default layout for N)");
  exp_cmd->add_option("--joints", exp.joints, "Joints averaged into the temporal map")->delimiter(',');

  ParamsArgs params;
  auto* params_cmd = app.add_subcommand("params", "Print parameter and FLOP counts");
  params_cmd->add_option("--config", params.config, "Run config file")->required();
  params_cmd->add_flag("--list", params.list, "List every array in checkpoint order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", ExitCode::kValidation, e.what());
  }

  set_warning_sink([](std::string_view message) { std::cerr << "ktp: warning " << message << '\n'; });
  try {
    if (*synth_cmd) return run_synth(synth);
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_eval(eval);
    if (*grad_cmd) return run_gradcheck(grad);
    if (*exp_cmd) return run_export(exp);
    if (*params_cmd) return run_params(params);
  } catch (const Error& e) {
    return report_error(e.kind(), e.code(), e.what());
  } catch (const std::exception& e) {
    return report_error("internal", ExitCode::kNumerical, e.what());
  }
  return 0;
}
