#include "ktp/model.hpp"

#include <algorithm>
#include <cmath>

#include "ktp/error.hpp"
#include "ktp/ops.hpp"

namespace ktp {

std::string_view mode_name(WiringMode mode) {
  switch (mode) {
    case WiringMode::kUnited: return "UMD";
    case WiringMode::kParallel: return "PMD";
    case WiringMode::kSeparateOne: return "SMD-S";
    case WiringMode::kSeparate: return "SMD";
    case WiringMode::kBaseline: return "BASELINE";
  }
  return "?";
}

WiringMode parse_mode(std::string_view name) {
  for (std::uint32_t id = 0; id <= 4; ++id) {
    const auto mode = static_cast<WiringMode>(id);
    if (mode_name(mode) == name) return mode;
  }
  throw ConfigError("unknown mode '" + std::string(name) + "' (expected UMD, PMD, SMD-S, SMD or BASELINE)");
}

WiringMode mode_from_id(std::uint32_t id) {
  if (id > 4) throw ConfigError("unknown mode id " + std::to_string(id));
  return static_cast<WiringMode>(id);
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(frames, "frames");
  positive(joints, "joints");
  positive(channels, "channels");
  positive(heads, "heads");
  positive(temporal_radius, "temporal_radius");
  if (channels % heads != 0) {
    throw ConfigError("heads (" + std::to_string(heads) + ") must divide channels (" +
                      std::to_string(channels) + ")");
  }
  if (static_cast<std::uint32_t>(mode) > 4) throw ConfigError("invalid mode");
  if (!(ln_eps > 0.0)) throw ConfigError("ln_eps must be positive");
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::full(std::size_t frames) {
  ModelConfig c;
  c.frames = frames;
  c.channels = 512;
  c.heads = 8;
  c.depth = 7;
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.frames = 4;
  c.joints = 5;
  c.channels = 8;
  c.heads = 2;
  c.depth = 1;
  return c;
}

namespace {

Tensor identity(std::size_t n) {
  std::vector<double> values(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) values[i * n + i] = 1.0;
  return Tensor::constant({n, n}, std::move(values));
}

// I - A: added to the learnable matrix so that combine() starts at I.
Tensor recentering_offset(const Tensor& local) {
  return sub(identity(local.dim(0)), local);
}

void push_encoder(std::vector<NamedParameter>& out, const std::string& prefix,
                  const std::string& group, const EncoderParams& p) {
  out.push_back({prefix + ".mhsa.qkv", group, p.mhsa.qkv, true});
  out.push_back({prefix + ".mhsa.out", group, p.mhsa.out, true});
  out.push_back({prefix + ".ln.gain", group, p.ln_gain, true});
  out.push_back({prefix + ".ln.bias", group, p.ln_bias, true});
  out.push_back({prefix + ".mlp.w1", group, p.mlp_w1, true});
  out.push_back({prefix + ".mlp.b1", group, p.mlp_b1, true});
  out.push_back({prefix + ".mlp.w2", group, p.mlp_w2, true});
  out.push_back({prefix + ".mlp.b2", group, p.mlp_b2, true});
}

Tensor copy_leaf(const Tensor& t) {
  return Tensor::parameter(t.shape(), std::vector<double>(t.values().begin(), t.values().end()));
}

EncoderParams clone_encoder(const EncoderParams& p) {
  EncoderParams c;
  c.mhsa.qkv = copy_leaf(p.mhsa.qkv);
  c.mhsa.out = copy_leaf(p.mhsa.out);
  c.mhsa.heads = p.mhsa.heads;
  c.ln_gain = copy_leaf(p.ln_gain);
  c.ln_bias = copy_leaf(p.ln_bias);
  c.mlp_w1 = copy_leaf(p.mlp_w1);
  c.mlp_b1 = copy_leaf(p.mlp_b1);
  c.mlp_w2 = copy_leaf(p.mlp_w2);
  c.mlp_b2 = copy_leaf(p.mlp_b2);
  return c;
}

}  // namespace

std::vector<NamedParameter> enumerate_parameters(const ModelParameters& params,
                                                 const ModelConfig& config) {
  std::vector<NamedParameter> out;
  out.push_back({"kpa.embed", "kpa", params.kpa.embed, true});
  out.push_back({"kpa.global_affinity", "kpa", params.kpa.global_affinity, config.kpa_global});
  out.push_back({"kpa.modulation", "kpa", params.kpa.modulation, true});
  out.push_back({"kpa.spatial_pos", "kpa", params.kpa.spatial_pos, true});
  for (std::size_t i = 0; i < params.tpa.blocks.size(); ++i) {
    const std::string prefix = "tpa.block" + std::to_string(i);
    const TPABlock& b = params.tpa.blocks[i];
    out.push_back({prefix + ".transform", "tpa", b.transform, true});
    out.push_back({prefix + ".global_affinity", "tpa", b.global_affinity, config.tpa_global});
    out.push_back({prefix + ".modulation", "tpa", b.modulation, true});
  }
  out.push_back({"tpa.temporal_pos", "tpa", params.tpa.temporal_pos, true});
  push_encoder(out, "entry_spatial", "entry", params.entry_spatial);
  push_encoder(out, "entry_temporal", "entry", params.entry_temporal);
  for (std::size_t l = 0; l < params.stack_spatial.size(); ++l) {
    push_encoder(out, "stack" + std::to_string(l) + ".spatial", "stack", params.stack_spatial[l]);
    push_encoder(out, "stack" + std::to_string(l) + ".temporal", "stack",
                 params.stack_temporal[l]);
  }
  out.push_back({"head.weight", "head", params.head_weight, true});
  out.push_back({"head.bias", "head", params.head_bias, true});
  return out;
}

ModelParameters init_parameters(const ModelConfig& config, const SkeletonGraph& skeleton,
                                std::uint64_t seed) {
  config.validate();
  if (skeleton.joint_count() != config.joints) {
    throw ConfigError("skeleton has " + std::to_string(skeleton.joint_count()) +
                      " joints but config expects " + std::to_string(config.joints));
  }
  const Rng root(seed);
  const std::size_t d = config.channels;
  ModelParameters p;

  PriorInit kpa_init;
  if (!config.kpa_global) kpa_init.affinity_scale = 0.0;
  Tensor kpa_offset;
  if (!config.kpa_local_prior) kpa_offset = recentering_offset(build_spatial_local(skeleton));
  Rng kpa_rng = root.split("kpa");
  p.kpa = init_kpa(config.joints, d, kpa_rng, kpa_init, kpa_offset);

  PriorInit tpa_init;
  if (!config.tpa_global) tpa_init.affinity_scale = 0.0;
  Tensor tpa_offset;
  if (!config.tpa_local_prior) {
    tpa_offset = recentering_offset(build_temporal_local(config.frames, config.temporal_radius));
  }
  Rng tpa_rng = root.split("tpa");
  p.tpa = init_tpa(config.frames, d, config.tpa_blocks(), tpa_rng, tpa_init, tpa_offset);

  Rng es_rng = root.split("entry_spatial");
  Rng et_rng = root.split("entry_temporal");
  p.entry_spatial = init_encoder(d, config.heads, es_rng, config.hidden());
  p.entry_temporal = init_encoder(d, config.heads, et_rng, config.hidden());
  for (std::size_t l = 0; l < config.depth; ++l) {
    Rng s_rng = root.split("stack" + std::to_string(l) + ".spatial");
    Rng t_rng = root.split("stack" + std::to_string(l) + ".temporal");
    p.stack_spatial.push_back(init_encoder(d, config.heads, s_rng, config.hidden()));
    p.stack_temporal.push_back(init_encoder(d, config.heads, t_rng, config.hidden()));
  }
  Rng head_rng = root.split("head");
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> w(d * 3);
  for (double& v : w) v = head_rng.uniform(-bound, bound);
  p.head_weight = Tensor::parameter({d, 3}, std::move(w));
  p.head_bias = Tensor::parameter({3}, {0.0, 0.0, 0.0});
  return p;
}

ModelParameters clone_parameters(const ModelParameters& params, const ModelConfig& config) {
  (void)config;
  ModelParameters c;
  c.kpa = {copy_leaf(params.kpa.embed), copy_leaf(params.kpa.global_affinity),
           copy_leaf(params.kpa.modulation), copy_leaf(params.kpa.spatial_pos)};
  for (const TPABlock& b : params.tpa.blocks) {
    c.tpa.blocks.push_back(
        {copy_leaf(b.transform), copy_leaf(b.global_affinity), copy_leaf(b.modulation)});
  }
  c.tpa.temporal_pos = copy_leaf(params.tpa.temporal_pos);
  c.entry_spatial = clone_encoder(params.entry_spatial);
  c.entry_temporal = clone_encoder(params.entry_temporal);
  for (const auto& e : params.stack_spatial) c.stack_spatial.push_back(clone_encoder(e));
  for (const auto& e : params.stack_temporal) c.stack_temporal.push_back(clone_encoder(e));
  c.head_weight = copy_leaf(params.head_weight);
  c.head_bias = copy_leaf(params.head_bias);
  return c;
}

Model::Model(ModelConfig config, SkeletonGraph skeleton, ModelParameters params)
    : config_(config), skeleton_(std::move(skeleton)), params_(std::move(params)) {
  config_.validate();
  if (skeleton_.joint_count() != config_.joints) {
    throw ConfigError("skeleton has " + std::to_string(skeleton_.joint_count()) +
                      " joints but config expects " + std::to_string(config_.joints));
  }
  if (params_.tpa.blocks.size() != config_.tpa_blocks()) {
    throw ConfigError("parameters carry " + std::to_string(params_.tpa.blocks.size()) +
                      " TPA blocks, mode " + std::string(mode_name(config_.mode)) + " needs " +
                      std::to_string(config_.tpa_blocks()));
  }
  if (params_.stack_spatial.size() != config_.depth ||
      params_.stack_temporal.size() != config_.depth) {
    throw ConfigError("parameter stack depth does not match config depth");
  }
  spatial_local_ = build_spatial_local(skeleton_);
  temporal_local_ = build_temporal_local(config_.frames, config_.temporal_radius);
}

Model Model::initialize(const ModelConfig& config, const SkeletonGraph& skeleton,
                        std::uint64_t seed) {
  return Model(config, skeleton, init_parameters(config, skeleton, seed));
}

void Model::zero_grad() {
  for (auto& p : named_parameters()) p.tensor.zero_grad();
}

ForwardRecord Model::forward(const PoseSequence& seq2d) const {
  return forward(seq2d.to_tensor());
}

ForwardRecord Model::forward(const Tensor& seq2d) const { return forward(seq2d, config_.mode); }

ForwardRecord Model::forward(const Tensor& seq2d, WiringMode mode) const {
  const std::size_t t = config_.frames;
  const std::size_t n = config_.joints;
  if (seq2d.shape() != Shape{t, n, 2}) {
    throw ShapeError("model input " + shape_string(seq2d.shape()) + " does not match [" +
                     std::to_string(t) + "x" + std::to_string(n) + "x2]");
  }
  if (mode == WiringMode::kSeparateOne ? params_.tpa.blocks.empty()
                                       : params_.tpa.blocks.size() < 2) {
    throw ConfigError("mode " + std::string(mode_name(mode)) + " needs more TPA blocks");
  }
  const double eps = config_.ln_eps;
  const ModelParameters& p = params_;

  TPAParams tpa = p.tpa;
  if (mode == WiringMode::kSeparateOne) tpa.blocks.resize(1);

  ForwardRecord record;
  auto spatial_entry = [&](const Tensor& x) {
    AttentionOutput a = encoder_block_with_attention(x, p.entry_spatial, eps);
    record.attn_spatial = a.attn;
    return a.output;
  };
  auto temporal_entry = [&](const Tensor& x) {
    AttentionOutput a = encoder_block_with_attention(x, p.entry_temporal, eps);
    record.attn_temporal = a.attn;
    return a.output;
  };

  const Tensor lifted = kpa_embed(seq2d, p.kpa);
  Tensor z;  // T×N×d_m after the entry stage
  switch (mode) {
    case WiringMode::kSeparate:
    case WiringMode::kSeparateOne: {
      const Tensor h_tn =
          kpa_apply_prior(lifted, p.kpa, combine(spatial_local_, p.kpa.global_affinity));
      const Tensor p_nt = swap_token_axes(spatial_entry(h_tn));
      const Tensor h_nt = tpa_stack(p_nt, tpa, temporal_local_);
      z = swap_token_axes(temporal_entry(h_nt));
      break;
    }
    case WiringMode::kUnited: {
      const Tensor h_tn =
          kpa_apply_prior(lifted, p.kpa, combine(spatial_local_, p.kpa.global_affinity));
      const Tensor h_nt = tpa_stack(swap_token_axes(h_tn), tpa, temporal_local_);
      const Tensor s = spatial_entry(swap_token_axes(h_nt));
      z = swap_token_axes(temporal_entry(swap_token_axes(s)));
      break;
    }
    case WiringMode::kParallel: {
      const Tensor h_tn =
          kpa_apply_prior(lifted, p.kpa, combine(spatial_local_, p.kpa.global_affinity));
      const Tensor kinematic = swap_token_axes(spatial_entry(h_tn));
      const Tensor trajectory = tpa_stack(swap_token_axes(lifted), tpa, temporal_local_);
      z = swap_token_axes(temporal_entry(add(kinematic, trajectory)));
      break;
    }
    case WiringMode::kBaseline: {
      const Tensor s = spatial_entry(add(lifted, p.kpa.spatial_pos));
      z = swap_token_axes(temporal_entry(add(swap_token_axes(s), p.tpa.temporal_pos)));
      break;
    }
  }
  for (std::size_t l = 0; l < p.stack_spatial.size(); ++l) {
    z = encoder_block(z, p.stack_spatial[l], eps);
    z = swap_token_axes(encoder_block(swap_token_axes(z), p.stack_temporal[l], eps));
  }
  record.pred = linear(z, p.head_weight, p.head_bias);
  return record;
}

AttentionMaps extract_attention(const ForwardRecord& record,
                                const std::vector<std::size_t>& temporal_joints) {
  AttentionMaps maps;
  const Tensor& s = record.attn_spatial;
  const Tensor& t = record.attn_temporal;
  if (!s.defined() || !t.defined() || s.rank() != 4 || t.rank() != 4) {
    throw ShapeError("forward record carries no attention maps");
  }
  const std::size_t frames = s.dim(0);
  const std::size_t heads = s.dim(1);
  const std::size_t joints = s.dim(2);
  maps.joints = joints;
  maps.frames = t.dim(2);
  maps.spatial.assign(joints * joints, 0.0);
  auto sv = s.values();
  const double spatial_w = 1.0 / static_cast<double>(frames * heads);
  for (std::size_t b = 0; b < frames * heads; ++b) {
    for (std::size_t i = 0; i < joints * joints; ++i) maps.spatial[i] += sv[b * joints * joints + i];
  }
  for (double& v : maps.spatial) v *= spatial_w;

  std::vector<std::size_t> selected = temporal_joints;
  if (selected.empty()) {
    for (std::size_t j = 0; j < t.dim(0); ++j) selected.push_back(j);
  }
  const std::size_t tf = maps.frames;
  const std::size_t theads = t.dim(1);
  maps.temporal.assign(tf * tf, 0.0);
  auto tv = t.values();
  for (std::size_t j : selected) {
    if (j >= t.dim(0)) throw ShapeError("temporal attention joint index out of range");
    for (std::size_t h = 0; h < theads; ++h) {
      const double* src = tv.data() + (j * theads + h) * tf * tf;
      for (std::size_t i = 0; i < tf * tf; ++i) maps.temporal[i] += src[i];
    }
  }
  const double temporal_w = 1.0 / static_cast<double>(selected.size() * theads);
  for (double& v : maps.temporal) v *= temporal_w;
  return maps;
}

ParameterBreakdown analytic_parameter_count(const ModelConfig& config) {
  ParameterBreakdown b;
  const std::size_t d = config.channels;
  b.kpa = kpa_parameter_count(config.joints, d);
  b.tpa = tpa_parameter_count(config.frames, d, config.tpa_blocks());
  b.entry = 2 * encoder_parameter_count(d, config.hidden());
  b.stack = 2 * config.depth * encoder_parameter_count(d, config.hidden());
  b.head = 3 * d + 3;
  return b;
}

std::size_t count_parameters(const ModelParameters& params, const ModelConfig& config) {
  std::size_t total = 0;
  for (const auto& p : enumerate_parameters(params, config)) total += p.tensor.size();
  return total;
}

std::uint64_t count_flops(const ModelConfig& config) {
  config.validate();
  const std::uint64_t t = config.frames;
  const std::uint64_t n = config.joints;
  const std::uint64_t d = config.channels;
  const std::uint64_t hidden = config.hidden();
  const std::uint64_t tokens = t * n;

  const std::uint64_t lift = 2 * tokens * 2 * d;
  const std::uint64_t kpa_mix = 2 * t * n * n * d;
  const std::uint64_t tpa_block = 2 * tokens * d * d + 2 * n * t * t * d;
  // projections + score/value products; sequence length S with B = tokens/S
  auto encoder = [&](std::uint64_t seq) {
    const std::uint64_t batch = tokens / seq;
    return 2 * tokens * (3 * d * d + d * d + 2 * d * hidden) + 4 * batch * seq * seq * d;
  };
  const std::uint64_t pair = encoder(n) + encoder(t);
  const std::uint64_t head = 2 * tokens * d * 3;

  std::uint64_t total = lift + pair + config.depth * pair + head;
  switch (config.mode) {
    case WiringMode::kSeparate:
    case WiringMode::kUnited:
    case WiringMode::kParallel:
      total += kpa_mix + 2 * tpa_block;
      break;
    case WiringMode::kSeparateOne:
      total += kpa_mix + tpa_block;
      break;
    case WiringMode::kBaseline:
      break;
  }
  return total;
}

}  // namespace ktp
