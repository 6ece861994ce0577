#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ktp {

// Deterministic generator with named child streams. Draws are built from the
// raw 64-bit engine output rather than std distributions, so sequences are
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

  // Independent stream keyed by (parent seed, tag). Unaffected by how many
  // values the parent has drawn.
  Rng split(std::string_view tag) const;
  Rng split(std::uint64_t index) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  // [0, 1) with 53 bits of precision.
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double normal();
  std::uint64_t below(std::uint64_t bound);

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ktp
