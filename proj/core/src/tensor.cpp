#include "ktp/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "ktp/error.hpp"

namespace ktp {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

const char* op_name(OpTag op) {
  switch (op) {
    case OpTag::kLeaf: return "leaf";
    case OpTag::kAdd: return "add";
    case OpTag::kSub: return "sub";
    case OpTag::kMul: return "mul";
    case OpTag::kScale: return "scale";
    case OpTag::kMatMul: return "matmul";
    case OpTag::kBatchMatMul: return "bmm";
    case OpTag::kMixRows: return "mix_rows";
    case OpTag::kPermute: return "permute";
    case OpTag::kReshape: return "reshape";
    case OpTag::kConcat: return "concat";
    case OpTag::kNarrow: return "narrow";
    case OpTag::kSoftmax: return "softmax";
    case OpTag::kLayerNorm: return "layer_norm";
    case OpTag::kGelu: return "gelu";
    case OpTag::kSum: return "sum";
    case OpTag::kMean: return "mean";
    case OpTag::kNorm: return "norm";
    case OpTag::kCustom: return "custom";
  }
  return "?";
}

namespace {

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<double> values,
                                        bool requires_grad) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw ShapeError("zero extent in shape " + shape_string(shape));
  }
  if (shape_size(shape) != values.size()) {
    throw ShapeError("shape " + shape_string(shape) + " needs " +
                     std::to_string(shape_size(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

thread_local std::uint64_t g_contraction_flops = 0;

}  // namespace

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values), false));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values), true));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  std::vector<double> values(shape_size(shape), value);
  return constant(std::move(shape), std::move(values));
}

Tensor Tensor::scalar(double value) { return constant({}, {value}); }

Tensor Tensor::from_op(OpTag op, Shape shape, std::vector<double> values,
                       std::vector<Tensor> inputs,
                       std::function<void(detail::Node&)> backward) {
  auto node = make_leaf(std::move(shape), std::move(values), false);
  node->op = op;
  bool any = std::any_of(inputs.begin(), inputs.end(),
                         [](const Tensor& t) { return t.requires_grad(); });
  // Constant subgraphs drop their history immediately.
  if (any) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& t : inputs) node->inputs.push_back(t.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_string(node_->shape));
  }
  return node_->shape[axis];
}

std::size_t Tensor::size() const { return node_->value.size(); }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_->op == OpTag::kLeaf; }
OpTag Tensor::op() const { return node_->op; }

std::span<const double> Tensor::values() const { return node_->value; }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const Shape& s = shape();
  if (index.size() != s.size()) throw ShapeError("index rank mismatch for " + shape_string(s));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= s[axis]) throw ShapeError("index out of range for " + shape_string(s));
    flat = flat * s[axis] + i;
    ++axis;
  }
  return node_->value[flat];
}

std::span<double> Tensor::mutable_values() {
  if (!is_leaf()) throw Error(ExitCode::kValidation, "tensor", "cannot mutate an interior tensor");
  return node_->value;
}

std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.assign(node_->value.size(), 0.0);
}

Tensor Tensor::detach() const { return constant(shape(), node_->value); }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ShapeError("backward needs a single-element loss, got " +
                     (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order of the reachable graph.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  visited.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (detail::Node* node : order) {
    if (node->op == OpTag::kLeaf) {
      node->ensure_grad();
    } else {
      node->grad.assign(node->value.size(), 0.0);
    }
  }
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward) node->backward(*node);
  }
}

std::uint64_t contraction_flops() { return g_contraction_flops; }
void reset_contraction_flops() { g_contraction_flops = 0; }
void add_contraction_flops(std::uint64_t flops) { g_contraction_flops += flops; }

}  // namespace ktp
