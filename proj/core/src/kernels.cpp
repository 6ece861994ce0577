#include "kernels.hpp"

#include <Eigen/Core>

namespace ktp::kernels {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

template <typename LhsT, typename RhsT>
void apply(MutMap& out, const LhsT& lhs, const RhsT& rhs, bool accumulate) {
  if (accumulate) {
    out.noalias() += lhs * rhs;
  } else {
    out.noalias() = lhs * rhs;
  }
}
}  // namespace

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n, bool trans_a, bool trans_b, bool accumulate) {
  const auto em = static_cast<Eigen::Index>(m);
  const auto ek = static_cast<Eigen::Index>(k);
  const auto en = static_cast<Eigen::Index>(n);
  MutMap out(c, em, en);
  if (!trans_a && !trans_b) {
    apply(out, ConstMap(a, em, ek), ConstMap(b, ek, en), accumulate);
  } else if (!trans_a && trans_b) {
    apply(out, ConstMap(a, em, ek), ConstMap(b, en, ek).transpose(), accumulate);
  } else if (trans_a && !trans_b) {
    apply(out, ConstMap(a, ek, em).transpose(), ConstMap(b, ek, en), accumulate);
  } else {
    apply(out, ConstMap(a, ek, em).transpose(), ConstMap(b, en, ek).transpose(), accumulate);
  }
}

}  // namespace ktp::kernels
