#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ktp/pose.hpp"
#include "ktp/prior_attention.hpp"
#include "ktp/tensor.hpp"
#include "ktp/topology.hpp"
#include "ktp/transformer.hpp"

namespace ktp {

// How the prior modules are wired around the entry attention blocks.
// The numeric ids are part of the checkpoint format.
enum class WiringMode : std::uint32_t {
  kUnited = 0,       // KPA -> TPA stack -> entry blocks -> encoders
  kParallel = 1,     // (KPA -> spatial block) + TPA(lifted input) -> temporal block
  kSeparateOne = 2,  // canonical wiring with a single TPA block
  kSeparate = 3,     // canonical: KPA -> spatial block -> TPA stack -> temporal block
  kBaseline = 4,     // linear lift + positional embeddings, no priors
};

std::string_view mode_name(WiringMode mode);  // UMD, PMD, SMD-S, SMD, BASELINE
WiringMode parse_mode(std::string_view name);
WiringMode mode_from_id(std::uint32_t id);

struct ModelConfig {
  std::size_t frames = 27;
  std::size_t joints = 17;
  std::size_t channels = 64;
  std::size_t heads = 4;
  std::size_t depth = 2;  // spatial/temporal encoder pairs after the entry blocks
  WiringMode mode = WiringMode::kSeparate;
  std::size_t temporal_radius = 1;
  // Ablation arms. Disabling a local prior re-centers the learnable matrix so
  // the combined topology starts at the identity; disabling the global
  // topology pins the learnable matrix and excludes it from training.
  bool kpa_local_prior = true;
  bool kpa_global = true;
  bool tpa_local_prior = true;
  bool tpa_global = true;
  double ln_eps = 1e-5;

  std::size_t hidden() const { return 2 * channels; }
  std::size_t tpa_blocks() const { return mode == WiringMode::kSeparateOne ? 1 : 2; }
  void validate() const;

  static ModelConfig desk();
  static ModelConfig full(std::size_t frames = 243);
  static ModelConfig tiny();

  bool operator==(const ModelConfig&) const = default;
};

struct ModelParameters {
  KPAParams kpa;
  TPAParams tpa;
  EncoderParams entry_spatial;
  EncoderParams entry_temporal;
  std::vector<EncoderParams> stack_spatial;
  std::vector<EncoderParams> stack_temporal;
  Tensor head_weight;  // d_m×3
  Tensor head_bias;    // 3
};

struct NamedParameter {
  std::string name;
  std::string group;  // kpa, tpa, entry, stack, head
  Tensor tensor;
  bool trainable = true;
};

// Fixed-order flat view of every learnable array. The order is the
// checkpoint layout.
std::vector<NamedParameter> enumerate_parameters(const ModelParameters& params,
                                                 const ModelConfig& config);

ModelParameters init_parameters(const ModelConfig& config, const SkeletonGraph& skeleton,
                                std::uint64_t seed);

// Deep copy with fresh leaves.
ModelParameters clone_parameters(const ModelParameters& params, const ModelConfig& config);

struct ForwardRecord {
  Tensor pred;           // T×N×3
  Tensor attn_spatial;   // T×h×N×N from the entry spatial block
  Tensor attn_temporal;  // N×h×T×T from the entry temporal block
};

struct AttentionMaps {
  std::vector<double> spatial;   // N×N, averaged over heads and frames
  std::vector<double> temporal;  // T×T, averaged over heads and selected joints
  std::size_t joints = 0;
  std::size_t frames = 0;
};

class Model {
 public:
  Model(ModelConfig config, SkeletonGraph skeleton, ModelParameters params);
  static Model initialize(const ModelConfig& config, const SkeletonGraph& skeleton,
                          std::uint64_t seed);

  // seq2d is T×N×2. Validates shapes before building any graph.
  ForwardRecord forward(const Tensor& seq2d) const;
  ForwardRecord forward(const PoseSequence& seq2d) const;
  ForwardRecord forward(const Tensor& seq2d, WiringMode mode) const;

  const ModelConfig& config() const noexcept { return config_; }
  const SkeletonGraph& skeleton() const noexcept { return skeleton_; }
  const ModelParameters& parameters() const noexcept { return params_; }
  ModelParameters& parameters() noexcept { return params_; }
  std::vector<NamedParameter> named_parameters() const {
    return enumerate_parameters(params_, config_);
  }
  const Tensor& spatial_local() const noexcept { return spatial_local_; }
  const Tensor& temporal_local() const noexcept { return temporal_local_; }
  void zero_grad();

 private:
  ModelConfig config_;
  SkeletonGraph skeleton_;
  ModelParameters params_;
  Tensor spatial_local_;
  Tensor temporal_local_;
};

// Head-averaged attention; `temporal_joints` selects the joints whose
// temporal maps are averaged (empty = all).
AttentionMaps extract_attention(const ForwardRecord& record,
                                const std::vector<std::size_t>& temporal_joints = {});

struct ParameterBreakdown {
  std::size_t kpa = 0;
  std::size_t tpa = 0;
  std::size_t entry = 0;  // entry spatial + temporal encoder blocks
  std::size_t stack = 0;  // L spatial + L temporal encoder blocks
  std::size_t head = 0;
  std::size_t total() const { return kpa + tpa + entry + stack + head; }
};

// Closed-form counts; must agree with enumerating init_parameters.
ParameterBreakdown analytic_parameter_count(const ModelConfig& config);
std::size_t count_parameters(const ModelParameters& params, const ModelConfig& config);
// Contraction FLOPs (2mnk per product) of one forward pass.
std::uint64_t count_flops(const ModelConfig& config);

}  // namespace ktp
