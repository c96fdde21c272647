#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pcip/errors.hpp"

namespace pcip::autodiff {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

struct TensorNode;

// Provenance of a produced node: the inputs it was computed from and the rule
// that routes the output gradient back into them. Leaves carry no record.
struct OpRecord {
  const char* name;
  std::vector<std::shared_ptr<TensorNode>> inputs;
  std::function<void(const TensorNode& out)> backward;
};

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  std::unique_ptr<OpRecord> op;  // null for leaves
  bool requires_grad = false;
  std::uint64_t seq = 0;  // creation order; inputs always precede outputs
};

namespace detail {
inline std::uint64_t next_seq() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

// Value-semantic handle to a node of the computation graph. Copies share the
// node; the graph stays alive as long as some handle reaches it.
class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(Shape shape, std::vector<double> values, bool requires_grad = false) {
    validate_shape(shape);
    const auto n = numel(shape);
    if (static_cast<std::int64_t>(values.size()) != n) {
      throw DimensionError("tensor leaf: shape " + shape_str(shape) + " expects " +
                           std::to_string(n) + " values, got " +
                           std::to_string(values.size()));
    }
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->grad.assign(static_cast<std::size_t>(n), 0.0);
    node->requires_grad = requires_grad;
    node->seq = detail::next_seq();
    return Tensor(std::move(node));
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = numel(shape);
    return leaf(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0),
                requires_grad);
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    const auto n = numel(shape);
    return leaf(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value),
                requires_grad);
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return leaf({1}, {value}, requires_grad);
  }

  const Shape& shape() const { return node_->shape; }
  std::int64_t rank() const { return static_cast<std::int64_t>(node_->shape.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(node_->values.size()); }

  std::vector<double>& values() { return node_->values; }
  const std::vector<double>& values() const { return node_->values; }
  std::vector<double>& grad() { return node_->grad; }
  const std::vector<double>& grad() const { return node_->grad; }

  /// Scalar extraction; the tensor must hold exactly one value.
  double item() const {
    if (size() != 1) {
      throw ContractError("item: tensor of shape " + shape_str(shape()) + " is not scalar");
    }
    return node_->values[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->op == nullptr; }

  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

  const std::shared_ptr<TensorNode>& node() const { return node_; }
  explicit operator bool() const { return node_ != nullptr; }
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

 private:
  static void validate_shape(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor: shape must have rank >= 1");
    for (auto d : shape) {
      if (d <= 0) throw DimensionError("tensor: non-positive dimension in " + shape_str(shape));
    }
  }

  std::shared_ptr<TensorNode> node_;
};

// Extension point used by ops.hpp, conv.hpp and the loss module to register a
// differentiable operation. requires_grad propagates from the inputs; the
// record (and the backward closure) is only kept when some input needs it.
inline Tensor make_op_node(const char* name, Shape shape, std::vector<double> values,
                           std::vector<std::shared_ptr<TensorNode>> inputs,
                           std::function<void(const TensorNode&)> backward) {
  auto node = std::make_shared<TensorNode>();
  const auto n = numel(shape);
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->grad.assign(static_cast<std::size_t>(n), 0.0);
  node->requires_grad =
      std::any_of(inputs.begin(), inputs.end(),
                  [](const auto& in) { return in->requires_grad; });
  if (node->requires_grad) {
    node->op = std::make_unique<OpRecord>(
        OpRecord{name, std::move(inputs), std::move(backward)});
  }
  node->seq = detail::next_seq();
  return Tensor(std::move(node));
}

// The op records reachable from a root, ordered so that every node appears
// before all of its inputs (reverse creation order is a valid reverse
// topological order, since inputs exist before the op that consumes them).
struct GraphTape {
  std::vector<TensorNode*> reverse_order;
};

inline GraphTape collect_tape(const Tensor& root) {
  GraphTape tape;
  if (!root.requires_grad()) return tape;
  std::unordered_set<TensorNode*> seen;
  std::vector<TensorNode*> stack{root.node().get()};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    TensorNode* n = stack.back();
    stack.pop_back();
    tape.reverse_order.push_back(n);
    if (!n->op) continue;
    for (const auto& in : n->op->inputs) {
      if (in->requires_grad && seen.insert(in.get()).second) {
        stack.push_back(in.get());
      }
    }
  }
  std::sort(tape.reverse_order.begin(), tape.reverse_order.end(),
            [](const TensorNode* a, const TensorNode* b) { return a->seq > b->seq; });
  return tape;
}

// Reverse-mode sweep. Leaf gradients accumulate across repeated calls;
// intermediate gradients are reset per sweep so each call contributes the
// gradient of this loss exactly once.
inline void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  GraphTape tape = collect_tape(loss);
  for (TensorNode* n : tape.reverse_order) {
    if (n->op) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }
  loss.node()->grad[0] += 1.0;
  for (TensorNode* n : tape.reverse_order) {
    if (n->op) n->op->backward(*n);
  }
}

}  // namespace pcip::autodiff
