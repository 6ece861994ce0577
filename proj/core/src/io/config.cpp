#include "ktp/io/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>

#include "config_values.hpp"
#include "ktp/error.hpp"
#include "text_reader.hpp"

namespace ktp::io {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<KeyValue> parse_key_values(const std::string& text) {
  ::ktp::detail::TextReader reader(text);
  std::vector<KeyValue> out;
  std::map<std::string, std::size_t> seen;
  while (auto raw = reader.next_line()) {
    std::string_view line = *raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", reader.line_offset());
    KeyValue kv{std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))),
                reader.line_offset()};
    if (kv.key.empty()) throw ParseError("empty key", kv.offset);
    if (seen.count(kv.key)) throw ParseError("duplicate key '" + kv.key + "'", kv.offset);
    seen[kv.key] = out.size();
    out.push_back(std::move(kv));
  }
  return out;
}

namespace detail {

bool parse_bool(const KeyValue& kv) {
  if (kv.value == "true" || kv.value == "1") return true;
  if (kv.value == "false" || kv.value == "0") return false;
  throw ParseError(kv.key + ": expected true or false, got '" + kv.value + "'", kv.offset);
}

std::uint64_t parse_u64(const KeyValue& kv) {
  std::uint64_t v = 0;
  const char* b = kv.value.data();
  const char* e = b + kv.value.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || kv.value.empty()) {
    throw ParseError(kv.key + ": expected a non-negative integer, got '" + kv.value + "'",
                     kv.offset);
  }
  return v;
}

std::size_t parse_count(const KeyValue& kv) { return static_cast<std::size_t>(parse_u64(kv)); }

double parse_real(const KeyValue& kv) {
  double v = 0.0;
  const char* b = kv.value.data();
  const char* e = b + kv.value.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || kv.value.empty() || !std::isfinite(v)) {
    throw ParseError(kv.key + ": expected a finite number, got '" + kv.value + "'", kv.offset);
  }
  return v;
}

std::vector<double> parse_real_list(const KeyValue& kv) {
  std::vector<double> out;
  if (kv.value.empty()) return out;
  std::string_view rest = kv.value;
  while (true) {
    const auto comma = rest.find(',');
    KeyValue item{kv.key, std::string(trim(rest.substr(0, comma))), kv.offset};
    out.push_back(parse_real(item));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

std::string format_real_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += ::ktp::detail::format_double(values[i]);
  }
  return out;
}

}  // namespace detail

void RunConfig::validate() const {
  model.validate();
  loss.validate(model.joints);
  adam.validate();
  if (schedule.batch_size == 0) throw ConfigError("batch_size must be positive");
}

namespace {

using Setter = std::function<void(RunConfig&, const KeyValue&)>;

const std::map<std::string, Setter>& run_setters() {
  using namespace detail;
  static const std::map<std::string, Setter> setters = {
      {"frames", [](RunConfig& c, const KeyValue& kv) { c.model.frames = parse_count(kv); }},
      {"joints", [](RunConfig& c, const KeyValue& kv) { c.model.joints = parse_count(kv); }},
      {"channels", [](RunConfig& c, const KeyValue& kv) { c.model.channels = parse_count(kv); }},
      {"heads", [](RunConfig& c, const KeyValue& kv) { c.model.heads = parse_count(kv); }},
      {"depth", [](RunConfig& c, const KeyValue& kv) { c.model.depth = parse_count(kv); }},
      {"mode",
       [](RunConfig& c, const KeyValue& kv) {
         try {
           c.model.mode = parse_mode(kv.value);
         } catch (const ConfigError& err) {
           throw ParseError(err.what(), kv.offset);
         }
       }},
      {"temporal_radius",
       [](RunConfig& c, const KeyValue& kv) { c.model.temporal_radius = parse_count(kv); }},
      {"kpa_local_prior",
       [](RunConfig& c, const KeyValue& kv) { c.model.kpa_local_prior = parse_bool(kv); }},
      {"kpa_global", [](RunConfig& c, const KeyValue& kv) { c.model.kpa_global = parse_bool(kv); }},
      {"tpa_local_prior",
       [](RunConfig& c, const KeyValue& kv) { c.model.tpa_local_prior = parse_bool(kv); }},
      {"tpa_global", [](RunConfig& c, const KeyValue& kv) { c.model.tpa_global = parse_bool(kv); }},
      {"joint_weights",
       [](RunConfig& c, const KeyValue& kv) { c.loss.joint_weights = parse_real_list(kv); }},
      {"lambda_t", [](RunConfig& c, const KeyValue& kv) { c.loss.lambda_t = parse_real(kv); }},
      {"lambda_m", [](RunConfig& c, const KeyValue& kv) { c.loss.lambda_m = parse_real(kv); }},
      {"lr", [](RunConfig& c, const KeyValue& kv) { c.adam.lr = parse_real(kv); }},
      {"lr_decay", [](RunConfig& c, const KeyValue& kv) { c.adam.decay = parse_real(kv); }},
      {"beta1", [](RunConfig& c, const KeyValue& kv) { c.adam.beta1 = parse_real(kv); }},
      {"beta2", [](RunConfig& c, const KeyValue& kv) { c.adam.beta2 = parse_real(kv); }},
      {"adam_eps", [](RunConfig& c, const KeyValue& kv) { c.adam.eps = parse_real(kv); }},
      {"steps", [](RunConfig& c, const KeyValue& kv) { c.schedule.steps = parse_count(kv); }},
      {"batch_size",
       [](RunConfig& c, const KeyValue& kv) { c.schedule.batch_size = parse_count(kv); }},
      {"steps_per_epoch",
       [](RunConfig& c, const KeyValue& kv) { c.schedule.steps_per_epoch = parse_count(kv); }},
      {"seed", [](RunConfig& c, const KeyValue& kv) { c.seed = parse_u64(kv); }},
      {"skeleton", [](RunConfig& c, const KeyValue& kv) { c.skeleton = kv.value; }},
  };
  return setters;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig config;
  const auto& setters = run_setters();
  for (const KeyValue& kv : parse_key_values(text)) {
    const auto it = setters.find(kv.key);
    if (it == setters.end()) throw ParseError("unknown config key '" + kv.key + "'", kv.offset);
    it->second(config, kv);
  }
  return config;
}

std::string format_run_config(const RunConfig& c) {
  using ::ktp::detail::format_double;
  auto flag = [](bool b) { return b ? "true" : "false"; };
  std::ostringstream out;
  out << "frames = " << c.model.frames << '\n'
      << "joints = " << c.model.joints << '\n'
      << "channels = " << c.model.channels << '\n'
      << "heads = " << c.model.heads << '\n'
      << "depth = " << c.model.depth << '\n'
      << "mode = " << mode_name(c.model.mode) << '\n'
      << "temporal_radius = " << c.model.temporal_radius << '\n'
      << "kpa_local_prior = " << flag(c.model.kpa_local_prior) << '\n'
      << "kpa_global = " << flag(c.model.kpa_global) << '\n'
      << "tpa_local_prior = " << flag(c.model.tpa_local_prior) << '\n'
      << "tpa_global = " << flag(c.model.tpa_global) << '\n'
      << "joint_weights = " << detail::format_real_list(c.loss.joint_weights) << '\n'
      << "lambda_t = " << format_double(c.loss.lambda_t) << '\n'
      << "lambda_m = " << format_double(c.loss.lambda_m) << '\n'
      << "lr = " << format_double(c.adam.lr) << '\n'
      << "lr_decay = " << format_double(c.adam.decay) << '\n'
      << "beta1 = " << format_double(c.adam.beta1) << '\n'
      << "beta2 = " << format_double(c.adam.beta2) << '\n'
      << "adam_eps = " << format_double(c.adam.eps) << '\n'
      << "steps = " << c.schedule.steps << '\n'
      << "batch_size = " << c.schedule.batch_size << '\n'
      << "steps_per_epoch = " << c.schedule.steps_per_epoch << '\n'
      << "seed = " << c.seed << '\n'
      << "skeleton = " << c.skeleton << '\n';
  return out.str();
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = ::ktp::detail::read_text_file(path);
  try {
    return parse_run_config(text);
  } catch (const ParseError& err) {
    throw ParseError(path.string() + ": " + err.reason(), err.offset());
  }
}

void save_run_config(const RunConfig& config, const std::filesystem::path& path) {
  ::ktp::detail::write_text_file(path, format_run_config(config));
}

std::optional<std::uint64_t> seed_override() {
  const char* env = std::getenv("KTP_SEED");
  if (!env || !*env) return std::nullopt;
  return detail::parse_u64(KeyValue{"KTP_SEED", env, 0});
}

bool apply_seed_override(RunConfig& config) {
  const auto seed = seed_override();
  if (!seed) return false;
  config.seed = *seed;
  return true;
}

std::string format_real(double value) { return ktp::detail::format_double(value); }

SkeletonGraph resolve_skeleton(const RunConfig& config, const std::filesystem::path& base_dir) {
  if (config.skeleton.empty()) return SkeletonGraph::default_for(config.model.joints);
  std::filesystem::path p(config.skeleton);
  if (p.is_relative()) p = base_dir / p;
  SkeletonGraph g = load_skeleton(p);
  if (g.joint_count() != config.model.joints) {
    throw ConfigError("skeleton " + p.string() + " has " + std::to_string(g.joint_count()) +
                      " joints but the config declares " + std::to_string(config.model.joints));
  }
  return g;
}

}  // namespace ktp::io
