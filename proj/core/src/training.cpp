#include "ktp/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ktp/error.hpp"
#include "ktp/log.hpp"
#include "ktp/ops.hpp"
#include "ktp/rng.hpp"
#include "text_reader.hpp"

namespace ktp {

void LossWeights::validate(std::size_t joints) const {
  if (!joint_weights.empty() && joint_weights.size() != joints) {
    throw ConfigError("joint_weights has " + std::to_string(joint_weights.size()) +
                      " entries, expected " + std::to_string(joints));
  }
  for (double w : joint_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("joint weights must be positive");
  }
  if (!(lambda_t >= 0.0) || !(lambda_m >= 0.0)) {
    throw ConfigError("loss weights lambda_t and lambda_m must be nonnegative");
  }
}

std::vector<double> LossWeights::resolved_joint_weights(std::size_t joints) const {
  validate(joints);
  return joint_weights.empty() ? std::vector<double>(joints, 1.0) : joint_weights;
}

namespace {

void check_pose_pair(const Tensor& pred, const Tensor& gt, const char* what) {
  if (pred.rank() != 3 || pred.dim(2) != 3 || pred.shape() != gt.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(pred.shape()) +
                     " vs " + shape_string(gt.shape()));
  }
}

Tensor frame_differences(const Tensor& x) {
  const std::size_t t = x.dim(0);
  return sub(narrow(x, 0, 1, t - 1), narrow(x, 0, 0, t - 1));
}

}  // namespace

Tensor loss_wmpjpe(const Tensor& pred, const Tensor& gt, std::span<const double> joint_weights) {
  check_pose_pair(pred, gt, "loss_wmpjpe");
  if (joint_weights.size() != pred.dim(1)) {
    throw ShapeError("loss_wmpjpe: " + std::to_string(joint_weights.size()) +
                     " joint weights for " + std::to_string(pred.dim(1)) + " joints");
  }
  const Tensor weights = Tensor::constant(
      {pred.dim(1)}, std::vector<double>(joint_weights.begin(), joint_weights.end()));
  return mean(mul(norm_lastaxis(sub(pred, gt)), weights));
}

Tensor loss_temporal_consistency(const Tensor& pred) {
  if (pred.rank() != 3) throw ShapeError("loss_temporal_consistency: expected T x N x D");
  if (pred.dim(0) < 2) {
    warn("temporal consistency loss needs at least 2 frames; returning 0");
    return Tensor::scalar(0.0);
  }
  const Tensor step = frame_differences(pred);
  const double count = static_cast<double>((pred.dim(0) - 1) * pred.dim(1));
  return scale(sum(mul(step, step)), 1.0 / count);
}

Tensor loss_mpjve(const Tensor& pred, const Tensor& gt) {
  check_pose_pair(pred, gt, "loss_mpjve");
  if (pred.dim(0) < 2) {
    warn("velocity loss needs at least 2 frames; returning 0");
    return Tensor::scalar(0.0);
  }
  return mean(norm_lastaxis(sub(frame_differences(pred), frame_differences(gt))));
}

LossTerms loss_total(const Tensor& pred, const Tensor& gt, const LossWeights& weights) {
  check_pose_pair(pred, gt, "loss_total");
  const std::vector<double> jw = weights.resolved_joint_weights(pred.dim(1));
  const Tensor lw = loss_wmpjpe(pred, gt, jw);
  const Tensor lt = loss_temporal_consistency(pred);
  const Tensor lm = loss_mpjve(pred, gt);
  LossTerms terms;
  terms.wmpjpe = lw.item();
  terms.temporal = lt.item();
  terms.velocity = lm.item();
  terms.total = add(add(lw, scale(lt, weights.lambda_t)), scale(lm, weights.lambda_m));
  return terms;
}

void AdamSettings::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("lr_decay must be in (0, 1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must be in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("adam_eps must be positive");
}

double learning_rate(const AdamSettings& settings, std::size_t epoch) {
  return settings.lr * std::pow(settings.decay, static_cast<double>(epoch));
}

OptimizerState OptimizerState::create(const std::vector<NamedParameter>& params,
                                      const AdamSettings& settings) {
  settings.validate();
  OptimizerState s;
  s.settings = settings;
  for (const auto& p : params) {
    s.names.push_back(p.name);
    s.first_moment.emplace_back(p.tensor.size(), 0.0);
    s.second_moment.emplace_back(p.tensor.size(), 0.0);
  }
  return s;
}

void adam_step(std::vector<NamedParameter>& params, OptimizerState& state, double lr) {
  if (params.size() != state.first_moment.size()) {
    throw ConfigError("optimizer state tracks " + std::to_string(state.first_moment.size()) +
                      " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].tensor.size() != state.first_moment[i].size()) {
      throw ConfigError("optimizer state shape mismatch for " + params[i].name);
    }
    for (double g : params[i].tensor.grad()) {
      if (!std::isfinite(g)) {
        throw NumericalError("non-finite gradient in parameter '" + params[i].name + "'");
      }
    }
  }
  const AdamSettings& a = state.settings;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(a.beta1, t);
  const double correct2 = 1.0 - std::pow(a.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    auto grad = params[i].tensor.grad();
    if (grad.empty()) continue;  // never reached by backward
    auto value = params[i].tensor.mutable_values();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      m[j] = a.beta1 * m[j] + (1.0 - a.beta1) * grad[j];
      v[j] = a.beta2 * v[j] + (1.0 - a.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / correct1;
      const double v_hat = v[j] / correct2;
      value[j] -= lr * m_hat / (std::sqrt(v_hat) + a.eps);
    }
  }
}

std::string training_log_header() { return "step,epoch,lr,loss_total,loss_w,loss_t,loss_m"; }

std::string training_log_row(const StepLog& row) {
  using detail::format_double;
  std::ostringstream out;
  out << row.step << ',' << row.epoch << ',' << format_double(row.lr) << ','
      << format_double(row.loss_total) << ',' << format_double(row.loss_w) << ','
      << format_double(row.loss_t) << ',' << format_double(row.loss_m);
  return out.str();
}

Tensor target_tensor(const PoseSequence& gt3d) {
  const double factor = unit_to_meters(gt3d.unit);
  std::vector<double> values = gt3d.values;
  for (double& v : values) v *= factor;
  return Tensor::constant(gt3d.shape(), std::move(values));
}

Trainer::Trainer(Model& model, LossWeights weights, AdamSettings adam, TrainSchedule schedule)
    : model_(model), weights_(std::move(weights)), schedule_(schedule) {
  weights_.validate(model_.config().joints);
  if (schedule_.batch_size == 0) throw ConfigError("batch_size must be positive");
  state_ = OptimizerState::create(model_.named_parameters(), adam);
}

std::size_t Trainer::steps_per_epoch(std::size_t clip_count) const {
  if (schedule_.steps_per_epoch > 0) return schedule_.steps_per_epoch;
  return (clip_count + schedule_.batch_size - 1) / schedule_.batch_size;
}

StepLog Trainer::step(const std::vector<TrainingClip>& clips) {
  if (clips.empty()) throw ConfigError("training needs at least one clip");
  const std::size_t per_epoch = steps_per_epoch(clips.size());
  const std::size_t batches_per_pass =
      (clips.size() + schedule_.batch_size - 1) / schedule_.batch_size;
  const std::size_t batch_index = steps_done_ % batches_per_pass;
  const std::size_t first = batch_index * schedule_.batch_size;
  const std::size_t last = std::min(clips.size(), first + schedule_.batch_size);
  const double share = 1.0 / static_cast<double>(last - first);

  StepLog row;
  row.step = steps_done_;
  row.epoch = steps_done_ / per_epoch;
  row.lr = learning_rate(state_.settings, row.epoch);

  model_.zero_grad();
  for (std::size_t c = first; c < last; ++c) {
    const TrainingClip& clip = clips[c];
    const ForwardRecord record = model_.forward(clip.input2d);
    const LossTerms terms = loss_total(record.pred, target_tensor(clip.gt3d), weights_);
    if (!std::isfinite(terms.total.item())) {
      throw NumericalError("non-finite loss at step " + std::to_string(steps_done_) + " on clip " +
                           clip.name);
    }
    backward(scale(terms.total, share));
    row.loss_total += share * terms.total.item();
    row.loss_w += share * terms.wmpjpe;
    row.loss_t += share * terms.temporal;
    row.loss_m += share * terms.velocity;
  }
  auto params = model_.named_parameters();
  adam_step(params, state_, row.lr);
  ++steps_done_;
  return row;
}

std::vector<StepLog> Trainer::run(const std::vector<TrainingClip>& clips,
                                  const std::function<void(const StepLog&)>& on_step) {
  std::vector<StepLog> rows;
  rows.reserve(schedule_.steps);
  for (std::size_t i = 0; i < schedule_.steps; ++i) {
    rows.push_back(step(clips));
    if (on_step) on_step(rows.back());
  }
  return rows;
}

bool GradcheckReport::passed() const {
  return !groups.empty() &&
         std::all_of(groups.begin(), groups.end(), [](const auto& g) { return g.passed; });
}

GradcheckReport gradcheck(const std::vector<NamedParameter>& params,
                          const std::function<Tensor()>& loss, double tolerance, double step) {
  GradcheckReport report;
  report.tolerance = tolerance;
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
  backward(loss());
  for (const auto& p : params) {
    Tensor t = p.tensor;
    GradcheckGroup group;
    group.name = p.name;
    group.entries = t.size();
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    if (analytic.empty()) analytic.assign(t.size(), 0.0);
    auto values = t.mutable_values();
    double diff = 0.0;
    double scale_a = 0.0;
    double scale_n = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + step;
      const double plus = loss().item();
      values[i] = original - step;
      const double minus = loss().item();
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * step);
      diff = std::max(diff, std::abs(numeric - analytic[i]));
      scale_a = std::max(scale_a, std::abs(analytic[i]));
      scale_n = std::max(scale_n, std::abs(numeric));
    }
    const double denom = std::max({scale_a, scale_n, 1e-300});
    group.max_rel_error = diff == 0.0 ? 0.0 : diff / denom;
    group.passed = std::isfinite(group.max_rel_error) && group.max_rel_error < tolerance;
    report.groups.push_back(std::move(group));
  }
  return report;
}

GradcheckReport gradcheck_model(const ModelConfig& config, const LossWeights& weights,
                                std::uint64_t seed, double tolerance, double step) {
  const Model model = Model::initialize(config, SkeletonGraph::default_for(config.joints), seed);
  Rng data_rng = Rng(seed).split("gradcheck.data");
  const std::size_t t = config.frames;
  const std::size_t n = config.joints;
  PoseSequence input(t, n, 2, "norm");
  for (double& v : input.values) v = data_rng.normal() * 0.5;
  PoseSequence gt(t, n, 3, "m");
  for (double& v : gt.values) v = data_rng.normal() * 0.3;
  const Tensor x = input.to_tensor();
  const Tensor y = target_tensor(gt);
  auto loss = [&]() { return loss_total(model.forward(x).pred, y, weights).total; };
  return gradcheck(model.named_parameters(), loss, tolerance, step);
}

}  // namespace ktp
