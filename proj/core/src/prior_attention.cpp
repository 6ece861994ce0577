#include "ktp/prior_attention.hpp"

#include <cmath>

#include "ktp/error.hpp"
#include "ktp/ops.hpp"
#include "ktp/topology.hpp"

namespace ktp {

namespace {

Tensor noisy_square(std::size_t n, Rng& rng, double scale, const Tensor& offset) {
  if (offset.defined() && offset.shape() != Shape{n, n}) {
    throw ShapeError("affinity offset " + shape_string(offset.shape()) + " is not " +
                     std::to_string(n) + "x" + std::to_string(n));
  }
  std::vector<double> values(n * n);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = rng.uniform(-scale, scale) + (offset.defined() ? offset.values()[i] : 0.0);
  }
  return Tensor::parameter({n, n}, std::move(values));
}

void check_tokens(const Tensor& tokens, std::size_t frames, std::size_t channels,
                  const char* what) {
  if (tokens.rank() != 3 || tokens.dim(1) != frames || tokens.dim(2) != channels) {
    throw ShapeError(std::string(what) + ": tokens " + shape_string(tokens.shape()) +
                     " do not match [N x " + std::to_string(frames) + " x " +
                     std::to_string(channels) + "]");
  }
}

}  // namespace

KPAParams init_kpa(std::size_t joints, std::size_t channels, Rng& rng, const PriorInit& init,
                   const Tensor& affinity_offset) {
  KPAParams p;
  Rng embed_rng = rng.split("kpa.embed");
  std::vector<double> w(2 * channels);
  const double bound = 1.0 / std::sqrt(2.0);
  for (double& v : w) v = embed_rng.uniform(-bound, bound);
  p.embed = Tensor::parameter({2, channels}, std::move(w));
  Rng affinity_rng = rng.split("kpa.global_affinity");
  p.global_affinity = noisy_square(joints, affinity_rng, init.affinity_scale, affinity_offset);
  p.modulation = Tensor::parameter({joints, channels}, std::vector<double>(joints * channels, 1.0));
  p.spatial_pos = Tensor::parameter({joints, channels}, std::vector<double>(joints * channels, 0.0));
  return p;
}

TPABlock init_tpa_block(std::size_t frames, std::size_t channels, Rng& rng,
                        const PriorInit& init, const Tensor& affinity_offset) {
  TPABlock b;
  Rng transform_rng = rng.split("transform");
  std::vector<double> t(channels * channels);
  for (std::size_t i = 0; i < channels; ++i) {
    for (std::size_t j = 0; j < channels; ++j) {
      t[i * channels + j] =
          (i == j ? 1.0 : 0.0) + transform_rng.uniform(-init.transform_noise, init.transform_noise);
    }
  }
  b.transform = Tensor::parameter({channels, channels}, std::move(t));
  Rng affinity_rng = rng.split("global_affinity");
  b.global_affinity = noisy_square(frames, affinity_rng, init.affinity_scale, affinity_offset);
  b.modulation = Tensor::parameter({frames, channels}, std::vector<double>(frames * channels, 1.0));
  return b;
}

TPAParams init_tpa(std::size_t frames, std::size_t channels, std::size_t block_count, Rng& rng,
                   const PriorInit& init, const Tensor& affinity_offset) {
  TPAParams p;
  for (std::size_t i = 0; i < block_count; ++i) {
    Rng block_rng = rng.split("tpa.block" + std::to_string(i));
    p.blocks.push_back(init_tpa_block(frames, channels, block_rng, init, affinity_offset));
  }
  p.temporal_pos = Tensor::parameter({frames, channels}, std::vector<double>(frames * channels, 0.0));
  return p;
}

Tensor kpa_embed(const Tensor& seq, const KPAParams& params) {
  if (seq.rank() != 3 || seq.dim(2) != 2) {
    throw ShapeError("kpa: input " + shape_string(seq.shape()) + " is not [T x N x 2]");
  }
  return linear(seq, params.embed);
}

Tensor kpa_apply_prior(const Tensor& lifted, const KPAParams& params, const Tensor& affinity) {
  if (lifted.rank() != 3 || params.modulation.shape() != Shape{lifted.dim(1), lifted.dim(2)}) {
    throw ShapeError("kpa: modulation " + shape_string(params.modulation.shape()) +
                     " does not match tokens " + shape_string(lifted.shape()));
  }
  const Tensor mixed = mix_rows(affinity, mul(lifted, params.modulation));
  return add(mixed, params.spatial_pos);
}

Tensor kpa_forward(const Tensor& seq, const KPAParams& params, const Tensor& spatial_local) {
  return kpa_apply_prior(kpa_embed(seq, params), params,
                         combine(spatial_local, params.global_affinity));
}

Tensor tpa_block(const Tensor& tokens, const TPABlock& block, const Tensor& temporal_local) {
  check_tokens(tokens, block.modulation.dim(0), block.transform.dim(0), "tpa");
  const Tensor lifted = linear(tokens, block.transform);
  return mix_rows(combine(temporal_local, block.global_affinity), mul(lifted, block.modulation));
}

Tensor tpa_stack(const Tensor& tokens, const TPAParams& params, const Tensor& temporal_local) {
  Tensor x = tokens;
  for (const TPABlock& block : params.blocks) x = tpa_block(x, block, temporal_local);
  return add(add(x, tokens), params.temporal_pos);
}

std::size_t kpa_parameter_count(std::size_t joints, std::size_t channels) {
  return 2 * channels + joints * joints + 2 * joints * channels;
}

std::size_t tpa_block_parameter_count(std::size_t frames, std::size_t channels) {
  return channels * channels + frames * frames + frames * channels;
}

std::size_t tpa_parameter_count(std::size_t frames, std::size_t channels, std::size_t block_count) {
  return block_count * tpa_block_parameter_count(frames, channels) + frames * channels;
}

}  // namespace ktp
