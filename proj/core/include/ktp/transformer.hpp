#pragma once

#include <cstddef>

#include "ktp/rng.hpp"
#include "ktp/tensor.hpp"

namespace ktp {

struct MHSAParams {
  Tensor qkv;  // d_m×3d_m, columns [Q | K | V]
  Tensor out;  // d_m×d_m
  std::size_t heads = 1;
};

struct EncoderParams {
  MHSAParams mhsa;
  Tensor ln_gain;  // d_m
  Tensor ln_bias;  // d_m
  Tensor mlp_w1;   // d_m×d_ff
  Tensor mlp_b1;   // d_ff
  Tensor mlp_w2;   // d_ff×d_m
  Tensor mlp_b2;   // d_m
};

struct AttentionOutput {
  Tensor output;  // B×S×d_m
  Tensor attn;    // B×h×S×S probabilities, detached
};

MHSAParams init_mhsa(std::size_t channels, std::size_t heads, Rng& rng);
// d_ff defaults to 2·d_m.
EncoderParams init_encoder(std::size_t channels, std::size_t heads, Rng& rng,
                           std::size_t hidden = 0);

// Multi-head self-attention over the S axis of tokens[B×S×d_m]:
// softmax(Q_i K_iᵀ/√d) V_i per head, heads concatenated, then `out`.
AttentionOutput mhsa(const Tensor& tokens, const MHSAParams& params);

// y = mhsa(x) + x; out = MLP(LN(y)) + y.
AttentionOutput encoder_block_with_attention(const Tensor& tokens, const EncoderParams& params,
                                             double ln_eps = 1e-5);
Tensor encoder_block(const Tensor& tokens, const EncoderParams& params, double ln_eps = 1e-5);

// [A×B×C] -> [B×A×C]; converts T×N×d_m spatial layout to N×T×d_m temporal
// layout and back.
Tensor swap_token_axes(const Tensor& x);

std::size_t mhsa_parameter_count(std::size_t channels);
std::size_t encoder_parameter_count(std::size_t channels, std::size_t hidden = 0);

}  // namespace ktp
