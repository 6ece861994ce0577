#pragma once

#include <cstddef>
#include <vector>

#include "ktp/rng.hpp"
#include "ktp/tensor.hpp"

namespace ktp {

/// Kinematics prior attention: lifts 2-D joints to d_m-wide tokens and mixes
/// them through the symmetrized skeleton-plus-learned joint affinity.
struct KPAParams {
  Tensor embed;            // 2×d_m
  Tensor global_affinity;  // N×N
  Tensor modulation;       // N×d_m, elementwise
  Tensor spatial_pos;      // N×d_m
};

struct TPABlock {
  Tensor transform;        // d_m×d_m
  Tensor global_affinity;  // T×T
  Tensor modulation;       // T×d_m
};

/// Trajectory prior attention: a residual stack of frame-mixing blocks plus
/// one temporal positional embedding.
struct TPAParams {
  std::vector<TPABlock> blocks;
  Tensor temporal_pos;  // T×d_m
};

struct PriorInit {
  double affinity_scale = 1e-2;   // Â ~ U(-s, s)
  double transform_noise = 1e-2;  // TPA transform = I + U(-s, s)
};

// Learnable matrices start at `affinity_offset` (N×N, may be empty for zero)
// plus noise; the offset lets an ablation re-center the combined topology.
KPAParams init_kpa(std::size_t joints, std::size_t channels, Rng& rng, const PriorInit& init = {},
                   const Tensor& affinity_offset = {});
TPABlock init_tpa_block(std::size_t frames, std::size_t channels, Rng& rng,
                        const PriorInit& init = {}, const Tensor& affinity_offset = {});
TPAParams init_tpa(std::size_t frames, std::size_t channels, std::size_t block_count, Rng& rng,
                   const PriorInit& init = {}, const Tensor& affinity_offset = {});

// Plain linear lift seq[T×N×2]·W -> [T×N×d_m].
Tensor kpa_embed(const Tensor& seq, const KPAParams& params);

// (M_N ⊙ (seq·W)) mixed over joints by combine(A_N, Â_N), plus the spatial
// positional embedding broadcast over frames. seq is T×N×2.
Tensor kpa_forward(const Tensor& seq, const KPAParams& params, const Tensor& spatial_local);
// Prior half of kpa_forward on already-lifted tokens[T×N×d_m], with the
// joint affinity supplied already combined.
Tensor kpa_apply_prior(const Tensor& lifted, const KPAParams& params, const Tensor& affinity);

// (M_T ⊙ (tokens·transform)) mixed over frames by combine(A_T, Â_T).
// tokens is N×T×d_m.
Tensor tpa_block(const Tensor& tokens, const TPABlock& block, const Tensor& temporal_local);

// Blocks applied in sequence, residual from the stack input, then the
// temporal positional embedding broadcast over joints.
Tensor tpa_stack(const Tensor& tokens, const TPAParams& params, const Tensor& temporal_local);

std::size_t kpa_parameter_count(std::size_t joints, std::size_t channels);
std::size_t tpa_block_parameter_count(std::size_t frames, std::size_t channels);
std::size_t tpa_parameter_count(std::size_t frames, std::size_t channels, std::size_t block_count);

}  // namespace ktp
