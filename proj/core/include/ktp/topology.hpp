#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ktp/rng.hpp"
#include "ktp/tensor.hpp"

namespace ktp {

struct Edge {
  std::size_t a = 0;
  std::size_t b = 0;
  bool operator==(const Edge&) const = default;
};

/// Joint set plus undirected bone list. Self-edges are never stored; the
/// local affinity builders add the diagonal themselves.
class SkeletonGraph {
 public:
  SkeletonGraph(std::vector<std::string> joint_names, std::vector<Edge> edges);

  // 17-joint Human3.6M layout with its 16 bones, pelvis at index 0.
  static SkeletonGraph h36m17();
  // Joints j0..j{n-1} connected in a path.
  static SkeletonGraph chain(std::size_t joints);
  // h36m17 for 17 joints, a chain otherwise.
  static SkeletonGraph default_for(std::size_t joints);

  std::size_t joint_count() const noexcept { return names_.size(); }
  const std::vector<std::string>& joint_names() const noexcept { return names_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  // Parent index per joint from a BFS rooted at `root`; the root maps to
  // itself. Requires the edge set to form a spanning tree.
  std::vector<std::size_t> parents(std::size_t root = 0) const;

  bool operator==(const SkeletonGraph&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Edge> edges_;
};

// Text form: `ktp-skel v1 <N>`, N lines `<index> <name>`, `edges:`, then
// `<i> <j>` lines.
SkeletonGraph parse_skeleton(const std::string& text);
std::string format_skeleton(const SkeletonGraph& skeleton);
SkeletonGraph load_skeleton(const std::filesystem::path& path);
void save_skeleton(const SkeletonGraph& skeleton, const std::filesystem::path& path);

// N×N: 1 on the diagonal and at every bone, 0 elsewhere.
Tensor build_spatial_local(const SkeletonGraph& skeleton);
// T×T band: 1 where |i - j| <= radius.
Tensor build_temporal_local(std::size_t frames, std::size_t radius = 1);

/// Fixed local topology with its learnable global counterpart.
struct AffinityPair {
  Tensor local;
  Tensor global_learnable;
};

// ((A + Â) + (A + Â)ᵀ) / 2, differentiable in Â.
Tensor combine(const AffinityPair& pair);
Tensor combine(const Tensor& local, const Tensor& global_learnable);

// Learnable n×n matrix, entries i.i.d. uniform in [-scale, scale].
Tensor init_global_affinity(std::size_t n, Rng& rng, double scale = 1e-2);

}  // namespace ktp
