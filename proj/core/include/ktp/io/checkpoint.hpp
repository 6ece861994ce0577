#pragma once

#include <filesystem>
#include <string>

#include "ktp/model.hpp"
#include "ktp/training.hpp"

namespace ktp::io {

// Binary little-endian layout:
//   "KTPF", u32 version (1),
//   u32 frames, joints, channels, heads, depth, mode id, temporal radius,
//   f64 lambda_t, lambda_m,
//   then for each array in enumerate_parameters order: u64 length, f64 × length.
struct Checkpoint {
  ModelConfig config;
  double lambda_t = 0.1;
  double lambda_m = 1.0;
  ModelParameters params;
};

std::string encode_checkpoint(const ModelConfig& config, const ModelParameters& params,
                              const LossWeights& weights);
// The skeleton is not stored; callers supply the one the model was built for
// (it has to match the joint count).
Checkpoint decode_checkpoint(const std::string& bytes, const SkeletonGraph& skeleton);
Checkpoint decode_checkpoint(const std::string& bytes);  // default skeleton for N

void save_checkpoint(const Model& model, const LossWeights& weights,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path, const SkeletonGraph& skeleton);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Optimizer sidecar: "KTPO", u32 version (1), u64 step, f64 lr, decay,
// beta1, beta2, eps, u64 array count, then per array: u64 name length, name
// bytes, u64 length, f64 first moments, f64 second moments.
std::string encode_optimizer(const OptimizerState& state);
OptimizerState decode_optimizer(const std::string& bytes);
void save_optimizer(const OptimizerState& state, const std::filesystem::path& path);
OptimizerState load_optimizer(const std::filesystem::path& path);

std::string read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace ktp::io
