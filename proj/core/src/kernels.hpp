#pragma once

#include <cstddef>

namespace ktp::kernels {

// C[m×n] (+)= op(A) · op(B), all row-major. op(A) is m×k, op(B) is k×n.
// With trans_a, A is stored k×m; with trans_b, B is stored n×k.
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n, bool trans_a, bool trans_b, bool accumulate);

}  // namespace ktp::kernels
