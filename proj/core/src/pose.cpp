#include "ktp/pose.hpp"

#include "ktp/error.hpp"

namespace ktp {

PoseSequence::PoseSequence(std::size_t t, std::size_t n, std::size_t d, std::string unit_tag)
    : frames(t), joints(n), dims(d), values(t * n * d, 0.0), unit(std::move(unit_tag)) {}

PoseSequence::PoseSequence(std::size_t t, std::size_t n, std::size_t d, std::vector<double> data,
                           std::string unit_tag)
    : frames(t), joints(n), dims(d), values(std::move(data)), unit(std::move(unit_tag)) {
  if (values.size() != t * n * d) {
    throw ShapeError("pose sequence " + std::to_string(t) + "x" + std::to_string(n) + "x" +
                     std::to_string(d) + " needs " + std::to_string(t * n * d) + " values, got " +
                     std::to_string(values.size()));
  }
}

Tensor PoseSequence::to_tensor() const { return Tensor::constant(shape(), values); }

PoseSequence PoseSequence::from_tensor(const Tensor& t, std::string unit_tag) {
  if (t.rank() != 3) throw ShapeError("pose tensor must be rank 3, got " + shape_string(t.shape()));
  return PoseSequence(t.dim(0), t.dim(1), t.dim(2),
                      std::vector<double>(t.values().begin(), t.values().end()),
                      std::move(unit_tag));
}

double unit_to_meters(const std::string& unit) {
  if (unit == "mm") return 1e-3;
  if (unit == "m" || unit == "norm" || unit == "px") return 1.0;
  throw ConfigError("unknown unit tag '" + unit + "'");
}

}  // namespace ktp
