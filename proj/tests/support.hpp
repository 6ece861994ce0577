#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ktp/ops.hpp"
#include "ktp/rng.hpp"
#include "ktp/tensor.hpp"
#include "ktp/training.hpp"

namespace ktp::test {

inline std::vector<double> random_values(std::size_t n, Rng& rng, double lo = -1.0,
                                         double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline Tensor random_parameter(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  const std::size_t n = shape_size(shape);
  return Tensor::parameter(std::move(shape), random_values(n, rng, lo, hi));
}

inline Tensor random_constant(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  const std::size_t n = shape_size(shape);
  return Tensor::constant(std::move(shape), random_values(n, rng, lo, hi));
}

// Reduces an arbitrary output to a scalar with fixed random weights so every
// output entry contributes a distinct amount.
inline Tensor weighted_sum(const Tensor& out, std::uint64_t seed = 99) {
  Rng rng(seed);
  return sum(mul(out, random_constant(out.shape(), rng)));
}

inline GradcheckReport check_grads(const std::vector<Tensor>& inputs,
                                   const std::function<Tensor()>& f, double tol = 1e-6) {
  std::vector<NamedParameter> params;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    params.push_back({"input" + std::to_string(i), "test", inputs[i], true});
  }
  return gradcheck(params, f, tol);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace ktp::test
