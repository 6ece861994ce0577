#include "ktp/topology.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>

#include "ktp/error.hpp"
#include "ktp/ops.hpp"
#include "text_reader.hpp"

namespace ktp {

SkeletonGraph::SkeletonGraph(std::vector<std::string> joint_names, std::vector<Edge> edges)
    : names_(std::move(joint_names)), edges_(std::move(edges)) {
  const std::size_t n = names_.size();
  if (n == 0) throw ConfigError("skeleton needs at least one joint");
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = edges_[i];
    if (e.a >= n || e.b >= n) {
      throw ConfigError("skeleton edge (" + std::to_string(e.a) + "," + std::to_string(e.b) +
                        ") out of range for " + std::to_string(n) + " joints");
    }
    if (e.a == e.b) throw ConfigError("skeleton self-edge at joint " + std::to_string(e.a));
    for (std::size_t j = 0; j < i; ++j) {
      const Edge& f = edges_[j];
      if ((f.a == e.a && f.b == e.b) || (f.a == e.b && f.b == e.a)) {
        throw ConfigError("duplicate skeleton edge (" + std::to_string(e.a) + "," +
                          std::to_string(e.b) + ")");
      }
    }
  }
}

SkeletonGraph SkeletonGraph::h36m17() {
  return SkeletonGraph(
      {"pelvis", "r_hip", "r_knee", "r_ankle", "l_hip", "l_knee", "l_ankle", "spine", "thorax",
       "neck", "head", "l_shoulder", "l_elbow", "l_wrist", "r_shoulder", "r_elbow", "r_wrist"},
      {{0, 1}, {1, 2}, {2, 3}, {0, 4}, {4, 5}, {5, 6}, {0, 7}, {7, 8}, {8, 9}, {9, 10},
       {8, 11}, {11, 12}, {12, 13}, {8, 14}, {14, 15}, {15, 16}});
}

SkeletonGraph SkeletonGraph::chain(std::size_t joints) {
  std::vector<std::string> names;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < joints; ++i) {
    names.push_back("j" + std::to_string(i));
    if (i > 0) edges.push_back({i - 1, i});
  }
  return SkeletonGraph(std::move(names), std::move(edges));
}

SkeletonGraph SkeletonGraph::default_for(std::size_t joints) {
  return joints == 17 ? h36m17() : chain(joints);
}

std::vector<std::size_t> SkeletonGraph::parents(std::size_t root) const {
  const std::size_t n = joint_count();
  if (root >= n) throw ConfigError("root joint out of range");
  if (edges_.size() + 1 != n) throw ConfigError("skeleton edges do not form a tree");
  std::vector<std::vector<std::size_t>> adjacency(n);
  for (const Edge& e : edges_) {
    adjacency[e.a].push_back(e.b);
    adjacency[e.b].push_back(e.a);
  }
  std::vector<std::size_t> parent(n, n);
  parent[root] = root;
  std::queue<std::size_t> frontier;
  frontier.push(root);
  while (!frontier.empty()) {
    const std::size_t j = frontier.front();
    frontier.pop();
    for (std::size_t k : adjacency[j]) {
      if (parent[k] == n) {
        parent[k] = j;
        frontier.push(k);
      }
    }
  }
  if (std::find(parent.begin(), parent.end(), n) != parent.end()) {
    throw ConfigError("skeleton is not connected");
  }
  return parent;
}

SkeletonGraph parse_skeleton(const std::string& text) {
  detail::TextReader reader(text);
  auto header = reader.tokens_of_next_line("skeleton header");
  if (header.size() != 3 || header[0] != "ktp-skel") {
    throw ParseError("expected 'ktp-skel v1 <N>' header", reader.line_offset());
  }
  if (header[1] != "v1") throw ParseError("unsupported skeleton version " + header[1], reader.line_offset());
  const std::size_t n = reader.parse_size(header[2], "joint count");
  if (n == 0) throw ParseError("joint count must be positive", reader.line_offset());

  std::vector<std::string> names(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto tokens = reader.tokens_of_next_line("joint line");
    if (tokens.size() != 2) throw ParseError("expected '<index> <name>'", reader.line_offset());
    if (reader.parse_size(tokens[0], "joint index") != i) {
      throw ParseError("joint indices must run 0.." + std::to_string(n - 1) + " in order",
                       reader.line_offset());
    }
    names[i] = tokens[1];
  }
  auto marker = reader.tokens_of_next_line("edges marker");
  if (marker.size() != 1 || marker[0] != "edges:") {
    throw ParseError("expected 'edges:'", reader.line_offset());
  }
  std::vector<Edge> edges;
  while (auto tokens = reader.maybe_tokens_of_next_line()) {
    if (tokens->size() != 2) throw ParseError("expected '<i> <j>'", reader.line_offset());
    Edge e{reader.parse_size((*tokens)[0], "edge endpoint"),
           reader.parse_size((*tokens)[1], "edge endpoint")};
    edges.push_back(e);
  }
  try {
    return SkeletonGraph(std::move(names), std::move(edges));
  } catch (const ConfigError& err) {
    throw ParseError(err.what(), reader.line_offset());
  }
}

std::string format_skeleton(const SkeletonGraph& skeleton) {
  std::ostringstream out;
  out << "ktp-skel v1 " << skeleton.joint_count() << '\n';
  for (std::size_t i = 0; i < skeleton.joint_count(); ++i) {
    out << i << ' ' << skeleton.joint_names()[i] << '\n';
  }
  out << "edges:\n";
  for (const Edge& e : skeleton.edges()) out << e.a << ' ' << e.b << '\n';
  return out.str();
}

SkeletonGraph load_skeleton(const std::filesystem::path& path) {
  return parse_skeleton(detail::read_text_file(path));
}

void save_skeleton(const SkeletonGraph& skeleton, const std::filesystem::path& path) {
  detail::write_text_file(path, format_skeleton(skeleton));
}

Tensor build_spatial_local(const SkeletonGraph& skeleton) {
  const std::size_t n = skeleton.joint_count();
  std::vector<double> values(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) values[i * n + i] = 1.0;
  for (const Edge& e : skeleton.edges()) {
    values[e.a * n + e.b] = 1.0;
    values[e.b * n + e.a] = 1.0;
  }
  return Tensor::constant({n, n}, std::move(values));
}

Tensor build_temporal_local(std::size_t frames, std::size_t radius) {
  if (frames == 0) throw ConfigError("temporal topology needs at least one frame");
  if (radius == 0) throw ConfigError("temporal radius must be at least 1");
  std::vector<double> values(frames * frames, 0.0);
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t j = 0; j < frames; ++j) {
      const std::size_t gap = i > j ? i - j : j - i;
      if (gap <= radius) values[i * frames + j] = 1.0;
    }
  }
  return Tensor::constant({frames, frames}, std::move(values));
}

Tensor combine(const Tensor& local, const Tensor& global_learnable) {
  if (local.rank() != 2 || local.dim(0) != local.dim(1) ||
      local.shape() != global_learnable.shape()) {
    throw ShapeError("combine: need matching square matrices, got " +
                     shape_string(local.shape()) + " and " +
                     shape_string(global_learnable.shape()));
  }
  const Tensor summed = add(local, global_learnable);
  return scale(add(summed, transpose(summed)), 0.5);
}

Tensor combine(const AffinityPair& pair) { return combine(pair.local, pair.global_learnable); }

Tensor init_global_affinity(std::size_t n, Rng& rng, double scale) {
  std::vector<double> values(n * n);
  for (double& v : values) v = rng.uniform(-scale, scale);
  return Tensor::parameter({n, n}, std::move(values));
}

}  // namespace ktp
