#include "ktp/io/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>

#include "ktp/error.hpp"

namespace ktp::io {

namespace {

constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(std::string_view s) { out_.append(s); }
  void u32(std::uint32_t v) { little(v, 4); }
  void u64(std::uint64_t v) { little(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::string take() { return std::move(out_); }

 private:
  void little(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& data) : data_(data) {}

  std::string_view bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string_view s(data_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(little(4, what)); }
  std::uint64_t u64(const char* what) { return little(8, what); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::size_t position() const { return pos_; }
  bool at_end() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (data_.size() - pos_ < n) {
      throw ParseError(std::string("truncated ") + what + ": need " + std::to_string(n) +
                           " bytes, have " + std::to_string(data_.size() - pos_),
                       pos_);
    }
  }
  std::uint64_t little(int n, const char* what) {
    need(static_cast<std::size_t>(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const std::string& data_;
  std::size_t pos_ = 0;
};

void expect_magic(Reader& r, std::string_view magic) {
  const std::size_t at = r.position();
  if (r.bytes(magic.size(), "magic") != magic) {
    throw ParseError("bad magic: expected '" + std::string(magic) + "'", at);
  }
  const std::size_t vat = r.position();
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) throw ParseError("unsupported version " + std::to_string(version), vat);
}

}  // namespace

std::string encode_checkpoint(const ModelConfig& config, const ModelParameters& params,
                              const LossWeights& weights) {
  Writer w;
  w.bytes("KTPF");
  w.u32(kVersion);
  for (std::size_t v : {config.frames, config.joints, config.channels, config.heads,
                        config.depth}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.u32(static_cast<std::uint32_t>(config.mode));
  w.u32(static_cast<std::uint32_t>(config.temporal_radius));
  w.f64(weights.lambda_t);
  w.f64(weights.lambda_m);
  for (const NamedParameter& p : enumerate_parameters(params, config)) {
    const auto& values = p.tensor.values();
    w.u64(values.size());
    for (double v : values) w.f64(v);
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes, const SkeletonGraph& skeleton) {
  Reader r(bytes);
  expect_magic(r, "KTPF");
  Checkpoint ck;
  const std::size_t config_at = r.position();
  ck.config.frames = r.u32("config");
  ck.config.joints = r.u32("config");
  ck.config.channels = r.u32("config");
  ck.config.heads = r.u32("config");
  ck.config.depth = r.u32("config");
  try {
    ck.config.mode = mode_from_id(r.u32("config"));
  } catch (const ConfigError& err) {
    throw ParseError(err.what(), config_at + 20);
  }
  ck.config.temporal_radius = r.u32("config");
  ck.lambda_t = r.f64("config");
  ck.lambda_m = r.f64("config");
  try {
    ck.config.validate();
  } catch (const ConfigError& err) {
    throw ParseError(std::string("invalid stored config: ") + err.what(), config_at);
  }
  if (skeleton.joint_count() != ck.config.joints) {
    throw ConfigError("checkpoint has " + std::to_string(ck.config.joints) +
                      " joints but the skeleton has " + std::to_string(skeleton.joint_count()));
  }
  ck.params = init_parameters(ck.config, skeleton, 0);
  for (NamedParameter& p : enumerate_parameters(ck.params, ck.config)) {
    const std::size_t at = r.position();
    const std::uint64_t n = r.u64("parameter length");
    if (n != p.tensor.size()) {
      throw ParseError(p.name + ": expected " + std::to_string(p.tensor.size()) +
                           " values, found " + std::to_string(n),
                       at);
    }
    if (r.remaining() < n * 8) {
      throw ParseError(p.name + ": truncated payload, expected " + std::to_string(n) +
                           " values, have " + std::to_string(r.remaining() / 8),
                       r.position());
    }
    for (double& v : p.tensor.mutable_values()) v = r.f64("parameter");
  }
  if (!r.at_end()) {
    throw ParseError("trailing bytes after parameters", r.position());
  }
  return ck;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  // Peek at the joint count to pick the default skeleton.
  Reader r(bytes);
  expect_magic(r, "KTPF");
  r.u32("config");
  const std::size_t joints = r.u32("config");
  if (joints == 0) throw ParseError("invalid stored config: zero joints", 12);
  return decode_checkpoint(bytes, SkeletonGraph::default_for(joints));
}

void save_checkpoint(const Model& model, const LossWeights& weights,
                     const std::filesystem::path& path) {
  write_binary_file(path, encode_checkpoint(model.config(), model.parameters(), weights));
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const SkeletonGraph& skeleton) {
  return decode_checkpoint(read_binary_file(path), skeleton);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_binary_file(path));
}

std::string encode_optimizer(const OptimizerState& state) {
  Writer w;
  w.bytes("KTPO");
  w.u32(kVersion);
  w.u64(state.step);
  for (double v : {state.settings.lr, state.settings.decay, state.settings.beta1,
                   state.settings.beta2, state.settings.eps}) {
    w.f64(v);
  }
  w.u64(state.names.size());
  for (std::size_t i = 0; i < state.names.size(); ++i) {
    w.u64(state.names[i].size());
    w.bytes(state.names[i]);
    w.u64(state.first_moment[i].size());
    for (double v : state.first_moment[i]) w.f64(v);
    for (double v : state.second_moment[i]) w.f64(v);
  }
  return w.take();
}

OptimizerState decode_optimizer(const std::string& bytes) {
  Reader r(bytes);
  expect_magic(r, "KTPO");
  OptimizerState s;
  s.step = r.u64("step");
  s.settings.lr = r.f64("settings");
  s.settings.decay = r.f64("settings");
  s.settings.beta1 = r.f64("settings");
  s.settings.beta2 = r.f64("settings");
  s.settings.eps = r.f64("settings");
  const std::uint64_t count = r.u64("array count");
  if (count > r.remaining()) throw ParseError("implausible array count", r.position() - 8);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t name_len = r.u64("name length");
    if (name_len > r.remaining()) throw ParseError("implausible name length", r.position() - 8);
    s.names.emplace_back(r.bytes(name_len, "name"));
    const std::uint64_t n = r.u64("moment length");
    if (n * 16 > r.remaining()) {
      throw ParseError(s.names.back() + ": truncated moments, expected " + std::to_string(n) +
                           " values",
                       r.position());
    }
    std::vector<double> m(n), v(n);
    for (double& x : m) x = r.f64("moment");
    for (double& x : v) x = r.f64("moment");
    s.first_moment.push_back(std::move(m));
    s.second_moment.push_back(std::move(v));
  }
  if (!r.at_end()) throw ParseError("trailing bytes after optimizer state", r.position());
  return s;
}

void save_optimizer(const OptimizerState& state, const std::filesystem::path& path) {
  write_binary_file(path, encode_optimizer(state));
}

OptimizerState load_optimizer(const std::filesystem::path& path) {
  return decode_optimizer(read_binary_file(path));
}

std::string read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  return data;
}

void write_binary_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace ktp::io
