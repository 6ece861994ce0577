#include "ktp/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "kernels.hpp"
#include "ktp/error.hpp"

namespace ktp {

namespace {

detail::Node& in(detail::Node& out, std::size_t i) { return *out.inputs[i]; }

// Returns the broadcast period of b over a: b.size() if b's shape is a
// suffix of a's (or equal), throws otherwise.
std::size_t broadcast_period(const Tensor& a, const Tensor& b, const char* what) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  bool suffix = sb.size() <= sa.size() &&
                std::equal(sb.begin(), sb.end(), sa.end() - static_cast<std::ptrdiff_t>(sb.size()));
  if (!suffix) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(sa) + " vs " +
                     shape_string(sb));
  }
  return b.size();
}

enum class Binary { kAdd, kSub, kMul };

Tensor binary(const Tensor& a, const Tensor& b, Binary kind) {
  static constexpr const char* kNames[] = {"add", "sub", "mul"};
  const std::size_t period = broadcast_period(a, b, kNames[static_cast<int>(kind)]);
  const std::size_t n = a.size();
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[i];
    const double y = bv[i % period];
    out[i] = kind == Binary::kAdd ? x + y : kind == Binary::kSub ? x - y : x * y;
  }
  const OpTag tag = kind == Binary::kAdd ? OpTag::kAdd
                    : kind == Binary::kSub ? OpTag::kSub
                                           : OpTag::kMul;
  return Tensor::from_op(tag, a.shape(), std::move(out), {a, b}, [kind, period](detail::Node& o) {
    detail::Node& na = in(o, 0);
    detail::Node& nb = in(o, 1);
    const std::size_t count = o.value.size();
    if (na.requires_grad) {
      na.ensure_grad();
      if (kind == Binary::kMul) {
        for (std::size_t i = 0; i < count; ++i) na.grad[i] += o.grad[i] * nb.value[i % period];
      } else {
        for (std::size_t i = 0; i < count; ++i) na.grad[i] += o.grad[i];
      }
    }
    if (nb.requires_grad) {
      nb.ensure_grad();
      for (std::size_t i = 0; i < count; ++i) {
        const double g = kind == Binary::kAdd   ? o.grad[i]
                         : kind == Binary::kSub ? -o.grad[i]
                                                : o.grad[i] * na.value[i];
        nb.grad[i % period] += g;
      }
    }
  });
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(t.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::kAdd); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::kSub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::kMul); }

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v *= factor;
  return Tensor::from_op(OpTag::kScale, a.shape(), std::move(out), {a},
                         [factor](detail::Node& o) {
                           detail::Node& na = in(o, 0);
                           na.ensure_grad();
                           for (std::size_t i = 0; i < o.grad.size(); ++i) {
                             na.grad[i] += factor * o.grad[i];
                           }
                         });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  return linear(a, b);
}

Tensor linear(const Tensor& x, const Tensor& w) {
  require_rank(w, 2, "linear");
  if (x.rank() < 1 || x.shape().back() != w.dim(0)) {
    throw ShapeError("linear: shape mismatch " + shape_string(x.shape()) + " vs " +
                     shape_string(w.shape()));
  }
  const std::size_t k = w.dim(0);
  const std::size_t n = w.dim(1);
  const std::size_t m = x.size() / k;
  Shape shape = x.shape();
  shape.back() = n;
  std::vector<double> out(m * n);
  kernels::gemm(x.values().data(), w.values().data(), out.data(), m, k, n, false, false, false);
  add_contraction_flops(2ULL * m * n * k);
  const OpTag tag = x.rank() == 2 ? OpTag::kMatMul : OpTag::kBatchMatMul;
  return Tensor::from_op(tag, std::move(shape), std::move(out), {x, w},
                         [m, k, n](detail::Node& o) {
                           detail::Node& nx = in(o, 0);
                           detail::Node& nw = in(o, 1);
                           if (nx.requires_grad) {
                             nx.ensure_grad();
                             // dX += G · Wᵀ
                             kernels::gemm(o.grad.data(), nw.value.data(), nx.grad.data(), m, n,
                                           k, false, true, true);
                           }
                           if (nw.requires_grad) {
                             nw.ensure_grad();
                             // dW += Xᵀ · G
                             kernels::gemm(nx.value.data(), o.grad.data(), nw.grad.data(), k, m,
                                           n, true, false, true);
                           }
                         });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  return add(linear(x, w), bias);
}

Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b) {
  require_rank(a, 3, "bmm");
  require_rank(b, 3, "bmm");
  const std::size_t batch = a.dim(0);
  const std::size_t m = a.dim(1);
  const std::size_t k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  const std::size_t bk = transpose_b ? b.dim(2) : b.dim(1);
  if (b.dim(0) != batch || bk != k) {
    throw ShapeError("bmm: shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()) + (transpose_b ? " (transposed)" : ""));
  }
  std::vector<double> out(batch * m * n);
  for (std::size_t i = 0; i < batch; ++i) {
    kernels::gemm(a.values().data() + i * m * k, b.values().data() + i * k * n,
                  out.data() + i * m * n, m, k, n, false, transpose_b, false);
  }
  add_contraction_flops(2ULL * batch * m * n * k);
  return Tensor::from_op(
      OpTag::kBatchMatMul, {batch, m, n}, std::move(out), {a, b},
      [batch, m, k, n, transpose_b](detail::Node& o) {
        detail::Node& na = in(o, 0);
        detail::Node& nb = in(o, 1);
        if (na.requires_grad) na.ensure_grad();
        if (nb.requires_grad) nb.ensure_grad();
        for (std::size_t i = 0; i < batch; ++i) {
          const double* g = o.grad.data() + i * m * n;
          if (na.requires_grad) {
            // dA += G · op(B)ᵀ
            kernels::gemm(g, nb.value.data() + i * k * n, na.grad.data() + i * m * k, m, n, k,
                          false, !transpose_b, true);
          }
          if (nb.requires_grad) {
            if (transpose_b) {
              // B stored n×k: dB += Gᵀ · A
              kernels::gemm(g, na.value.data() + i * m * k, nb.grad.data() + i * k * n, n, m, k,
                            true, false, true);
            } else {
              kernels::gemm(na.value.data() + i * m * k, g, nb.grad.data() + i * k * n, k, m, n,
                            true, false, true);
            }
          }
        }
      });
}

Tensor mix_rows(const Tensor& affinity, const Tensor& x) {
  require_rank(affinity, 2, "mix_rows");
  require_rank(x, 3, "mix_rows");
  const std::size_t m = affinity.dim(0);
  const std::size_t k = affinity.dim(1);
  const std::size_t batch = x.dim(0);
  const std::size_t n = x.dim(2);
  if (x.dim(1) != k) {
    throw ShapeError("mix_rows: shape mismatch " + shape_string(affinity.shape()) + " vs " +
                     shape_string(x.shape()));
  }
  std::vector<double> out(batch * m * n);
  for (std::size_t i = 0; i < batch; ++i) {
    kernels::gemm(affinity.values().data(), x.values().data() + i * k * n,
                  out.data() + i * m * n, m, k, n, false, false, false);
  }
  add_contraction_flops(2ULL * batch * m * n * k);
  return Tensor::from_op(OpTag::kMixRows, {batch, m, n}, std::move(out), {affinity, x},
                         [batch, m, k, n](detail::Node& o) {
                           detail::Node& na = in(o, 0);
                           detail::Node& nx = in(o, 1);
                           if (na.requires_grad) na.ensure_grad();
                           if (nx.requires_grad) nx.ensure_grad();
                           for (std::size_t i = 0; i < batch; ++i) {
                             const double* g = o.grad.data() + i * m * n;
                             if (na.requires_grad) {
                               kernels::gemm(g, nx.value.data() + i * k * n, na.grad.data(), m,
                                             n, k, false, true, true);
                             }
                             if (nx.requires_grad) {
                               kernels::gemm(na.value.data(), g, nx.grad.data() + i * k * n, k,
                                             m, n, true, false, true);
                             }
                           }
                         });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  return permute(a, {1, 0});
}

Tensor permute(const Tensor& a, std::initializer_list<std::size_t> axes) {
  return permute(a, std::span<const std::size_t>(axes.begin(), axes.size()));
}

Tensor permute(const Tensor& a, std::span<const std::size_t> axes) {
  const Shape& src = a.shape();
  const std::size_t rank = src.size();
  if (axes.size() != rank) throw ShapeError("permute: axis count mismatch for " + shape_string(src));
  std::vector<bool> seen(rank, false);
  for (std::size_t ax : axes) {
    if (ax >= rank || seen[ax]) throw ShapeError("permute: invalid axis list");
    seen[ax] = true;
  }
  Shape dst(rank);
  for (std::size_t i = 0; i < rank; ++i) dst[i] = src[axes[i]];

  std::vector<std::size_t> src_stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) src_stride[i - 1] = src_stride[i] * src[i];
  // Stride in the source buffer for each destination axis.
  std::vector<std::size_t> walk(rank);
  for (std::size_t i = 0; i < rank; ++i) walk[i] = src_stride[axes[i]];

  // map[j] = source offset of destination element j
  const std::size_t count = a.size();
  std::vector<std::size_t> map(count);
  std::vector<std::size_t> index(rank, 0);
  std::size_t offset = 0;
  for (std::size_t j = 0; j < count; ++j) {
    map[j] = offset;
    for (std::size_t ax = rank; ax-- > 0;) {
      if (++index[ax] < dst[ax]) {
        offset += walk[ax];
        break;
      }
      offset -= walk[ax] * (dst[ax] - 1);
      index[ax] = 0;
    }
  }
  std::vector<double> out(count);
  auto av = a.values();
  for (std::size_t j = 0; j < count; ++j) out[j] = av[map[j]];
  return Tensor::from_op(OpTag::kPermute, std::move(dst), std::move(out), {a},
                         [map = std::move(map)](detail::Node& o) {
                           detail::Node& na = in(o, 0);
                           na.ensure_grad();
                           for (std::size_t j = 0; j < map.size(); ++j) na.grad[map[j]] += o.grad[j];
                         });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw ShapeError("reshape: cannot view " + shape_string(a.shape()) + " as " +
                     shape_string(shape));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  return Tensor::from_op(OpTag::kReshape, std::move(shape), std::move(out), {a},
                         [](detail::Node& o) {
                           detail::Node& na = in(o, 0);
                           na.ensure_grad();
                           for (std::size_t i = 0; i < o.grad.size(); ++i) na.grad[i] += o.grad[i];
                         });
}

Tensor concat_lastaxis(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Shape lead = parts[0].shape();
  lead.pop_back();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    Shape s = p.shape();
    if (s.empty()) throw ShapeError("concat: scalar input");
    const std::size_t w = s.back();
    s.pop_back();
    if (s != lead) {
      throw ShapeError("concat: shape mismatch " + shape_string(parts[0].shape()) + " vs " +
                       shape_string(p.shape()));
    }
    widths.push_back(w);
    total += w;
  }
  const std::size_t rows = shape_size(lead);
  std::vector<double> out(rows * total);
  std::size_t col = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto pv = parts[p].values();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pv.data() + r * widths[p], widths[p], out.data() + r * total + col);
    }
    col += widths[p];
  }
  Shape shape = lead;
  shape.push_back(total);
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return Tensor::from_op(OpTag::kConcat, std::move(shape), std::move(out), std::move(inputs),
                         [widths, rows, total](detail::Node& o) {
                           std::size_t c = 0;
                           for (std::size_t p = 0; p < widths.size(); ++p) {
                             detail::Node& np = in(o, p);
                             if (np.requires_grad) {
                               np.ensure_grad();
                               for (std::size_t r = 0; r < rows; ++r) {
                                 for (std::size_t j = 0; j < widths[p]; ++j) {
                                   np.grad[r * widths[p] + j] += o.grad[r * total + c + j];
                                 }
                               }
                             }
                             c += widths[p];
                           }
                         });
}

Tensor narrow(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& src = a.shape();
  if (axis >= src.size() || length == 0 || start + length > src[axis]) {
    throw ShapeError("narrow: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") on axis " + std::to_string(axis) +
                     " out of bounds for " + shape_string(src));
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= src[i];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < src.size(); ++i) inner *= src[i];
  const std::size_t extent = src[axis];
  Shape shape = src;
  shape[axis] = length;
  std::vector<double> out(outer * length * inner);
  auto av = a.values();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(av.data() + (o * extent + start) * inner, length * inner,
                out.data() + o * length * inner);
  }
  return Tensor::from_op(OpTag::kNarrow, std::move(shape), std::move(out), {a},
                         [outer, inner, extent, start, length](detail::Node& o) {
                           detail::Node& na = in(o, 0);
                           na.ensure_grad();
                           for (std::size_t b = 0; b < outer; ++b) {
                             const double* g = o.grad.data() + b * length * inner;
                             double* dst = na.grad.data() + (b * extent + start) * inner;
                             for (std::size_t i = 0; i < length * inner; ++i) dst[i] += g[i];
                           }
                         });
}

Tensor slice_lastaxis(const Tensor& a, std::size_t start, std::size_t length) {
  if (a.rank() == 0) throw ShapeError("slice_lastaxis: scalar input");
  return narrow(a, a.rank() - 1, start, length);
}

Tensor softmax_lastaxis(const Tensor& x) {
  if (x.rank() == 0) throw ShapeError("softmax: scalar input");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  auto xv = x.values();
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = xv.data() + r * n;
    double* dst = out.data() + r * n;
    double peak = src[0];
    for (std::size_t j = 0; j < n; ++j) {
      if (std::isnan(src[j])) throw NumericalError("softmax: NaN input");
      peak = std::max(peak, src[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      dst[j] = std::exp(src[j] - peak);
      total += dst[j];
    }
    for (std::size_t j = 0; j < n; ++j) dst[j] /= total;
  }
  return Tensor::from_op(OpTag::kSoftmax, x.shape(), std::move(out), {x},
                         [rows, n](detail::Node& o) {
                           detail::Node& nx = in(o, 0);
                           nx.ensure_grad();
                           for (std::size_t r = 0; r < rows; ++r) {
                             const double* y = o.value.data() + r * n;
                             const double* g = o.grad.data() + r * n;
                             double dot = 0.0;
                             for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
                             double* dx = nx.grad.data() + r * n;
                             for (std::size_t j = 0; j < n; ++j) dx[j] += y[j] * (g[j] - dot);
                           }
                         });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.rank() == 0) throw ShapeError("layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw ShapeError("layer_norm: gain/bias " + shape_string(gain.shape()) + "/" +
                     shape_string(bias.shape()) + " do not match width " + std::to_string(d));
  }
  if (!(eps >= 0.0)) throw ShapeError("layer_norm: eps must be nonnegative");
  const std::size_t rows = x.size() / d;
  auto xv = x.values();
  auto gv = gain.values();
  auto bv = bias.values();
  std::vector<double> out(x.size());
  std::vector<double> normalized(x.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += src[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (src[j] - mu) * (src[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      // A zero-variance slice with eps = 0 normalizes to 0 rather than NaN.
      const double centered = src[j] - mu;
      const double xh = centered == 0.0 ? 0.0 : centered * is;
      normalized[r * d + j] = xh;
      out[r * d + j] = gv[j] * xh + bv[j];
    }
  }
  return Tensor::from_op(
      OpTag::kLayerNorm, x.shape(), std::move(out), {x, gain, bias},
      [rows, d, normalized = std::move(normalized), inv_std = std::move(inv_std)](detail::Node& o) {
        detail::Node& nx = in(o, 0);
        detail::Node& ng = in(o, 1);
        detail::Node& nb = in(o, 2);
        if (ng.requires_grad) ng.ensure_grad();
        if (nb.requires_grad) nb.ensure_grad();
        if (nx.requires_grad) nx.ensure_grad();
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* g = o.grad.data() + r * d;
          const double* xh = normalized.data() + r * d;
          double mean_dxh = 0.0;
          double mean_dxh_xh = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            if (ng.requires_grad) ng.grad[j] += g[j] * xh[j];
            if (nb.requires_grad) nb.grad[j] += g[j];
            const double dxh = g[j] * ng.value[j];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xh[j];
          }
          if (!nx.requires_grad) continue;
          mean_dxh *= inv_d;
          mean_dxh_xh *= inv_d;
          double* dx = nx.grad.data() + r * d;
          for (std::size_t j = 0; j < d; ++j) {
            const double dxh = g[j] * ng.value[j];
            dx[j] += inv_std[r] * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
          }
        }
      });
}

Tensor gelu(const Tensor& x) {
  auto xv = x.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * std::numbers::sqrt2 * 0.5));
  }
  return Tensor::from_op(OpTag::kGelu, x.shape(), std::move(out), {x}, [](detail::Node& o) {
    detail::Node& nx = in(o, 0);
    nx.ensure_grad();
    constexpr double kInvSqrt2Pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const double v = nx.value[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 * 0.5));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      nx.grad[i] += o.grad[i] * (cdf + v * pdf);
    }
  });
}

Tensor sum(const Tensor& a) {
  auto av = a.values();
  const double total = std::accumulate(av.begin(), av.end(), 0.0);
  return Tensor::from_op(OpTag::kSum, {}, {total}, {a}, [](detail::Node& o) {
    detail::Node& na = in(o, 0);
    na.ensure_grad();
    for (double& g : na.grad) g += o.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  auto av = a.values();
  const double n = static_cast<double>(a.size());
  const double total = std::accumulate(av.begin(), av.end(), 0.0);
  return Tensor::from_op(OpTag::kMean, {}, {total / n}, {a}, [n](detail::Node& o) {
    detail::Node& na = in(o, 0);
    na.ensure_grad();
    for (double& g : na.grad) g += o.grad[0] / n;
  });
}

Tensor norm_lastaxis(const Tensor& a) {
  if (a.rank() == 0) throw ShapeError("norm_lastaxis: scalar input");
  const std::size_t n = a.shape().back();
  const std::size_t rows = a.size() / n;
  Shape shape = a.shape();
  shape.pop_back();
  auto av = a.values();
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += av[r * n + j] * av[r * n + j];
    out[r] = std::sqrt(acc);
  }
  return Tensor::from_op(OpTag::kNorm, std::move(shape), std::move(out), {a},
                         [rows, n](detail::Node& o) {
                           detail::Node& na = in(o, 0);
                           na.ensure_grad();
                           for (std::size_t r = 0; r < rows; ++r) {
                             const double len = o.value[r];
                             if (len == 0.0) continue;
                             const double g = o.grad[r] / len;
                             for (std::size_t j = 0; j < n; ++j) {
                               na.grad[r * n + j] += g * na.value[r * n + j];
                             }
                           }
                         });
}

}  // namespace ktp
