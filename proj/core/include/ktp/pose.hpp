#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ktp/tensor.hpp"

namespace ktp {

/// T×N×D joint coordinates, row-major (frame, joint, coordinate).
struct PoseSequence {
  std::size_t frames = 0;
  std::size_t joints = 0;
  std::size_t dims = 0;
  std::vector<double> values;
  std::string unit = "mm";

  PoseSequence() = default;
  PoseSequence(std::size_t t, std::size_t n, std::size_t d, std::string unit_tag = "mm");
  PoseSequence(std::size_t t, std::size_t n, std::size_t d, std::vector<double> data,
               std::string unit_tag = "mm");

  double& operator()(std::size_t t, std::size_t n, std::size_t c) {
    return values[(t * joints + n) * dims + c];
  }
  double operator()(std::size_t t, std::size_t n, std::size_t c) const {
    return values[(t * joints + n) * dims + c];
  }

  Shape shape() const { return {frames, joints, dims}; }
  Tensor to_tensor() const;
  static PoseSequence from_tensor(const Tensor& t, std::string unit_tag = "mm");

  bool operator==(const PoseSequence&) const = default;
};

// Multiplier converting `unit` to meters: mm -> 1e-3, m -> 1. Other tags
// (norm, px) are unitless and map to 1.
double unit_to_meters(const std::string& unit);

}  // namespace ktp
