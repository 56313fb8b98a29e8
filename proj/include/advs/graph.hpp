#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "advs/tensor.hpp"

namespace advs {

template <typename Scalar>
class Graph;

/// Handle to a node of a computation record.
template <typename Scalar>
struct Var {
  Graph<Scalar>* graph = nullptr;
  std::size_t id = 0;

  const BasicTensor<Scalar>& value() const { return graph->value(*this); }
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const { return graph->requires_grad(*this); }
};

/// Reverse-mode computation record (a tape).
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order. Leaves are either owned tensors or borrowed constants
/// whose storage must outlive the graph.
template <typename Scalar>
class Graph {
 public:
  using TensorT = BasicTensor<Scalar>;
  using Array = typename TensorT::Array;
  using Handle = Var<Scalar>;
  /// Local gradient rule: reads the node's output gradient and
  /// accumulates into operand gradients.
  using Rule = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Handle variable(TensorT value, bool requires_grad = true) {
    Node n;
    n.owned = std::move(value);
    n.owned.requires_grad = requires_grad;
    n.requires_grad = requires_grad;
    return push(std::move(n));
  }

  Handle constant(TensorT value) { return variable(std::move(value), false); }

  /// Constant leaf that refers to external storage without copying.
  Handle constant_ref(const TensorT& value) {
    Node n;
    n.borrowed = &value;
    return push(std::move(n));
  }

  /// Appends an operation node. `rule` is dropped when no operand needs a gradient.
  Handle record(TensorT value, std::vector<std::size_t> operands, Rule rule) {
    Node n;
    n.owned = std::move(value);
    for (std::size_t op : operands) {
      if (op >= nodes_.size()) throw InvalidArgument("operand refers to a node not yet recorded");
      n.requires_grad = n.requires_grad || nodes_[op].requires_grad;
    }
    n.operands = std::move(operands);
    if (n.requires_grad) n.rule = std::move(rule);
    return push(std::move(n));
  }

  const TensorT& value(Handle v) const { return node(v).tensor(); }
  const TensorT& value(std::size_t id) const { return nodes_.at(id).tensor(); }
  bool requires_grad(Handle v) const { return node(v).requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::size_t>& operands(std::size_t id) const { return nodes_.at(id).operands; }

  /// Gradient buffer of a node during a backward pass; allocated on first use.
  Array& grad_buffer(std::size_t id) {
    Node& n = nodes_.at(id);
    if (n.grad.size() == 0) n.grad = Array::Zero(n.tensor().size());
    return n.grad;
  }
  bool has_grad(std::size_t id) const { return nodes_.at(id).grad.size() != 0; }

  /// Backpropagates from a scalar root. Gradients from any earlier call are
  /// discarded first; each reachable node's rule runs exactly once.
  void backward(Handle root) {
    if (root.graph != this) throw InvalidArgument("backward root belongs to another graph");
    const TensorT& r = value(root);
    if (r.size() != 1) {
      throw ShapeError("backward requires a scalar root, got shape " + shape_string(r.shape()));
    }
    for (Node& n : nodes_) {
      n.grad.resize(0);
      if (n.owned.requires_grad) n.owned.grad.reset();
    }
    rule_applications_ = 0;
    if (!node(root).requires_grad) return;
    grad_buffer(root.id).setOnes();
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.size() == 0 || !n.rule) continue;
      n.rule(*this, i);
      ++rule_applications_;
    }
    for (Node& n : nodes_) {
      if (!n.owned.requires_grad || !n.operands.empty()) continue;
      n.owned.grad = n.grad.size() ? n.grad : Array::Zero(n.owned.size());
    }
  }

  /// Gradient of the last backward pass with respect to `v`; zeros when unreachable.
  TensorT gradient(Handle v) const {
    const Node& n = node(v);
    const TensorT& t = n.tensor();
    return TensorT(t.shape(), n.grad.size() ? n.grad : Array::Zero(t.size()));
  }

  /// Leaf tensor with its `grad` field as populated by the last backward pass.
  const TensorT& leaf(Handle v) const { return node(v).tensor(); }

  std::size_t last_rule_applications() const { return rule_applications_; }

 private:
  struct Node {
    TensorT owned;
    const TensorT* borrowed = nullptr;
    std::vector<std::size_t> operands;
    Rule rule;
    Array grad;
    bool requires_grad = false;

    const TensorT& tensor() const { return borrowed ? *borrowed : owned; }
  };

  const Node& node(Handle v) const {
    if (v.graph != this) throw InvalidArgument("variable belongs to another graph");
    return nodes_.at(v.id);
  }

  Handle push(Node n) {
    nodes_.push_back(std::move(n));
    return Handle{this, nodes_.size() - 1};
  }

  std::deque<Node> nodes_;  // stable references across appends
  std::size_t rule_applications_ = 0;
};

}  // namespace advs
