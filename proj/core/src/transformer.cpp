#include "ktp/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ktp/error.hpp"
#include "ktp/ops.hpp"

namespace ktp {

namespace {

Tensor uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  std::vector<double> values(rows * cols);
  for (double& v : values) v = rng.uniform(-bound, bound);
  return Tensor::parameter({rows, cols}, std::move(values));
}

Tensor filled_vector(std::size_t n, double value) {
  return Tensor::parameter({n}, std::vector<double>(n, value));
}

}  // namespace

MHSAParams init_mhsa(std::size_t channels, std::size_t heads, Rng& rng) {
  if (heads == 0 || channels % heads != 0) {
    throw ConfigError("head count " + std::to_string(heads) + " does not divide width " +
                      std::to_string(channels));
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
  MHSAParams p;
  Rng qkv_rng = rng.split("qkv");
  Rng out_rng = rng.split("out");
  p.qkv = uniform_matrix(channels, 3 * channels, bound, qkv_rng);
  p.out = uniform_matrix(channels, channels, bound, out_rng);
  p.heads = heads;
  return p;
}

EncoderParams init_encoder(std::size_t channels, std::size_t heads, Rng& rng, std::size_t hidden) {
  if (hidden == 0) hidden = 2 * channels;
  if (hidden < channels) throw ConfigError("MLP width must be at least the token width");
  const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
  EncoderParams p;
  Rng mhsa_rng = rng.split("mhsa");
  p.mhsa = init_mhsa(channels, heads, mhsa_rng);
  p.ln_gain = filled_vector(channels, 1.0);
  p.ln_bias = filled_vector(channels, 0.0);
  Rng w1_rng = rng.split("mlp.w1");
  Rng w2_rng = rng.split("mlp.w2");
  p.mlp_w1 = uniform_matrix(channels, hidden, bound, w1_rng);
  p.mlp_b1 = filled_vector(hidden, 0.0);
  p.mlp_w2 = uniform_matrix(hidden, channels, bound, w2_rng);
  p.mlp_b2 = filled_vector(channels, 0.0);
  return p;
}

AttentionOutput mhsa(const Tensor& tokens, const MHSAParams& params) {
  if (tokens.rank() != 3) {
    throw ShapeError("mhsa: tokens " + shape_string(tokens.shape()) + " are not [B x S x d]");
  }
  const std::size_t batch = tokens.dim(0);
  const std::size_t seq = tokens.dim(1);
  const std::size_t width = tokens.dim(2);
  if (params.qkv.shape() != Shape{width, 3 * width} || params.out.shape() != Shape{width, width}) {
    throw ShapeError("mhsa: weights " + shape_string(params.qkv.shape()) + "/" +
                     shape_string(params.out.shape()) + " do not match width " +
                     std::to_string(width));
  }
  if (params.heads == 0 || width % params.heads != 0) {
    throw ConfigError("head count " + std::to_string(params.heads) + " does not divide width " +
                      std::to_string(width));
  }
  const std::size_t heads = params.heads;
  const std::size_t head_width = width / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_width));

  const Tensor qkv = linear(tokens, params.qkv);
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(heads);
  std::vector<double> attn(batch * heads * seq * seq);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor q = slice_lastaxis(qkv, h * head_width, head_width);
    const Tensor k = slice_lastaxis(qkv, width + h * head_width, head_width);
    const Tensor v = slice_lastaxis(qkv, 2 * width + h * head_width, head_width);
    const Tensor probs = softmax_lastaxis(scale(bmm(q, k, /*transpose_b=*/true), inv_sqrt));
    auto pv = probs.values();
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy_n(pv.data() + b * seq * seq, seq * seq,
                  attn.data() + (b * heads + h) * seq * seq);
    }
    head_outputs.push_back(bmm(probs, v));
  }
  AttentionOutput result;
  result.output = linear(concat_lastaxis(head_outputs), params.out);
  result.attn = Tensor::constant({batch, heads, seq, seq}, std::move(attn));
  return result;
}

AttentionOutput encoder_block_with_attention(const Tensor& tokens, const EncoderParams& params,
                                             double ln_eps) {
  AttentionOutput attended = mhsa(tokens, params.mhsa);
  const Tensor y = add(attended.output, tokens);
  const Tensor normed = layer_norm(y, params.ln_gain, params.ln_bias, ln_eps);
  const Tensor hidden = gelu(linear(normed, params.mlp_w1, params.mlp_b1));
  attended.output = add(linear(hidden, params.mlp_w2, params.mlp_b2), y);
  return attended;
}

Tensor encoder_block(const Tensor& tokens, const EncoderParams& params, double ln_eps) {
  return encoder_block_with_attention(tokens, params, ln_eps).output;
}

Tensor swap_token_axes(const Tensor& x) {
  if (x.rank() != 3) throw ShapeError("swap_token_axes: expected rank 3, got " + shape_string(x.shape()));
  return permute(x, {1, 0, 2});
}

std::size_t mhsa_parameter_count(std::size_t channels) { return 4 * channels * channels; }

std::size_t encoder_parameter_count(std::size_t channels, std::size_t hidden) {
  if (hidden == 0) hidden = 2 * channels;
  return mhsa_parameter_count(channels) + 2 * channels + channels * hidden + hidden +
         hidden * channels + channels;
}

}  // namespace ktp
