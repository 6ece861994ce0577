#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ktp {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

enum class OpTag : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kScale,
  kMatMul,
  kBatchMatMul,
  kMixRows,
  kPermute,
  kReshape,
  kConcat,
  kNarrow,
  kSoftmax,
  kLayerNorm,
  kGelu,
  kSum,
  kMean,
  kNorm,
  kCustom,
};

const char* op_name(OpTag op);

class Tensor;

namespace detail {

// One recorded operation. Inputs are kept alive by the node; saved
// intermediates live inside the backward closure.
struct Node {
  OpTag op = OpTag::kLeaf;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates (+=) into the inputs' grads.
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

/// Handle to a dense row-major array of doubles.
///
/// Values never change after construction, except for leaves created with
/// `Tensor::parameter`, which an optimizer may overwrite between passes.
/// Copying a Tensor copies the handle, not the storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  // Builds an interior node. `backward` receives the output node and must
  // accumulate into the grads of `inputs` that require them.
  static Tensor from_op(OpTag op, Shape shape, std::vector<double> values,
                        std::vector<Tensor> inputs,
                        std::function<void(detail::Node&)> backward);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;
  bool requires_grad() const;
  bool is_leaf() const;
  OpTag op() const;

  std::span<const double> values() const;
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  // Leaf-only write access, for parameter updates.
  std::span<double> mutable_values();

  // Empty span until a backward pass has touched this tensor.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Constant with the same values, detached from the tape.
  Tensor detach() const;

  detail::Node* node() const noexcept { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const noexcept { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Runs reverse-mode differentiation from a single-element tensor.
///
/// Interior gradients are reset at the start of every call; leaf gradients
/// accumulate, so call `zero_grad` on parameters between independent passes.
void backward(const Tensor& loss);

// Running count of floating-point operations issued by contraction kernels
// (2mnk per m×k by k×n product) on the calling thread. Forward passes only.
std::uint64_t contraction_flops();
void reset_contraction_flops();
void add_contraction_flops(std::uint64_t flops);

}  // namespace ktp
