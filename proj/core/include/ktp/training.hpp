#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ktp/model.hpp"
#include "ktp/pose.hpp"
#include "ktp/tensor.hpp"

namespace ktp {

struct LossWeights {
  std::vector<double> joint_weights;  // empty means all ones
  double lambda_t = 0.1;
  double lambda_m = 1.0;

  void validate(std::size_t joints) const;
  std::vector<double> resolved_joint_weights(std::size_t joints) const;

  bool operator==(const LossWeights&) const = default;
};

// Mean over frames and joints of w_n · ‖pred − gt‖. Shapes T×N×3.
Tensor loss_wmpjpe(const Tensor& pred, const Tensor& gt, std::span<const double> joint_weights);
// Mean over t ≥ 1 and joints of ‖pred(t) − pred(t−1)‖². Zero (with a
// warning) when T < 2.
Tensor loss_temporal_consistency(const Tensor& pred);
// Mean over t ≥ 1 and joints of ‖Δpred(t) − Δgt(t)‖. Zero (with a warning)
// when T < 2.
Tensor loss_mpjve(const Tensor& pred, const Tensor& gt);

struct LossTerms {
  Tensor total;
  double wmpjpe = 0.0;
  double temporal = 0.0;
  double velocity = 0.0;
};

// L_W + λ_T·L_T + λ_M·L_M
LossTerms loss_total(const Tensor& pred, const Tensor& gt, const LossWeights& weights);

struct AdamSettings {
  double lr = 7e-5;
  double decay = 0.99;  // multiplicative, per epoch
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
  bool operator==(const AdamSettings&) const = default;
};

// base · decay^epoch
double learning_rate(const AdamSettings& settings, std::size_t epoch);

struct OptimizerState {
  AdamSettings settings;
  std::uint64_t step = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  static OptimizerState create(const std::vector<NamedParameter>& params,
                               const AdamSettings& settings);
  bool operator==(const OptimizerState&) const = default;
};

// One bias-corrected Adam update at learning rate `lr` over trainable
// parameters. Any non-finite gradient aborts before anything is modified.
void adam_step(std::vector<NamedParameter>& params, OptimizerState& state, double lr);

struct TrainSchedule {
  std::size_t steps = 2000;
  std::size_t batch_size = 7;
  // 0: one epoch is one pass over the clip set.
  std::size_t steps_per_epoch = 0;

  bool operator==(const TrainSchedule&) const = default;
};

struct TrainingClip {
  std::string name;
  PoseSequence input2d;  // T×N×2
  PoseSequence gt3d;     // T×N×3, root-relative
};

struct StepLog {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_w = 0.0;
  double loss_t = 0.0;
  double loss_m = 0.0;
};

std::string training_log_header();
std::string training_log_row(const StepLog& row);

// Ground truth scaled to meters, the unit the regression head predicts in.
Tensor target_tensor(const PoseSequence& gt3d);

class Trainer {
 public:
  Trainer(Model& model, LossWeights weights, AdamSettings adam, TrainSchedule schedule);

  StepLog step(const std::vector<TrainingClip>& clips);
  // Runs schedule.steps steps; `on_step` sees every row as it is produced.
  std::vector<StepLog> run(const std::vector<TrainingClip>& clips,
                           const std::function<void(const StepLog&)>& on_step = {});

  std::size_t steps_per_epoch(std::size_t clip_count) const;
  const OptimizerState& state() const noexcept { return state_; }
  OptimizerState& state() noexcept { return state_; }

 private:
  Model& model_;
  LossWeights weights_;
  TrainSchedule schedule_;
  OptimizerState state_;
  std::size_t steps_done_ = 0;
};

// Gradient audit.
struct GradcheckGroup {
  std::string name;
  std::size_t entries = 0;
  double max_rel_error = 0.0;  // ‖analytic − numeric‖∞ / max(‖analytic‖∞, ‖numeric‖∞)
  bool passed = false;
};

struct GradcheckReport {
  std::vector<GradcheckGroup> groups;
  double tolerance = 0.0;
  bool passed() const;
};

// Central differences of `loss` with respect to every entry of every listed
// parameter, compared with one backward pass.
GradcheckReport gradcheck(const std::vector<NamedParameter>& params,
                          const std::function<Tensor()>& loss, double tolerance,
                          double step = 1e-6);

// Builds a seeded model for `config`, a random input/target pair, and audits
// loss_total through it.
GradcheckReport gradcheck_model(const ModelConfig& config, const LossWeights& weights,
                                std::uint64_t seed, double tolerance, double step = 1e-6);

}  // namespace ktp
