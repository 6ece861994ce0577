#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ktp/tensor.hpp"

namespace ktp {

// Elementwise binary ops. `b` either matches `a` exactly or matches a
// trailing suffix of `a`'s shape, in which case it is broadcast over the
// leading axes (bias vectors, positional embeddings, modulation matrices).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

// a[m×k] · b[k×n].
Tensor matmul(const Tensor& a, const Tensor& b);
// x[...×k] · w[k×n] applied to every row of the leading axes.
Tensor linear(const Tensor& x, const Tensor& w);
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
// Batched a[B×m×k] · b[B×k×n]; with transpose_b, b is [B×n×k].
Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b = false);
// affinity[m×k] applied to the second-to-last axis of x[B×k×n] -> [B×m×n].
// Channels (the last axis) never mix.
Tensor mix_rows(const Tensor& affinity, const Tensor& x);

Tensor transpose(const Tensor& a);  // 2-D
Tensor permute(const Tensor& a, std::span<const std::size_t> axes);
Tensor permute(const Tensor& a, std::initializer_list<std::size_t> axes);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat_lastaxis(std::span<const Tensor> parts);
Tensor narrow(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);
Tensor slice_lastaxis(const Tensor& a, std::size_t start, std::size_t length);

// Max-subtracted softmax over the last axis. NaN input raises NumericalError.
Tensor softmax_lastaxis(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
// 0.5·x·(1 + erf(x/√2)).
Tensor gelu(const Tensor& x);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Euclidean norm over the last axis; [...×n] -> [...]. The subgradient at
// the origin is taken as zero.
Tensor norm_lastaxis(const Tensor& a);

}  // namespace ktp
