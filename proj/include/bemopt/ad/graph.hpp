#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bemopt/ad/tensor.hpp"

namespace bemopt::ad {

class Graph;

// Handle to a node of a Graph.
class Var {
 public:
  Var() = default;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Define-by-run tape. Nodes are appended in evaluation order; backward walks
// them in reverse. A graph built with `record = false` keeps values only.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  Var constant(Tensor t) {
    Node n;
    n.value = std::move(t);
    return push(std::move(n));
  }

  // Leaf bound to a parameter. The value is referenced, not copied; the
  // parameter must outlive the graph. Repeated calls return the same node.
  Var parameter(const Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
    Node n;
    n.ref = &p.value;
    n.requires_grad = record_ && p.requires_grad;
    const Var v = push(std::move(n));
    param_nodes_.emplace(&p, v.id());
    return v;
  }

  // Appends an op result. `backward` runs only if some input requires grad.
  Var make(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    if (record_) {
      for (const Var& in : inputs) n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
      if (n.requires_grad) n.backward = std::move(backward);
    }
    return push(std::move(n));
  }
  Var make(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    if (record_) {
      for (const Var& in : inputs) n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
      if (n.requires_grad) n.backward = std::move(backward);
    }
    return push(std::move(n));
  }

  const Tensor& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.ref ? *n.ref : n.value;
  }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient accumulator of a node, allocated on first use.
  Tensor& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() != value(id).size()) n.grad = Tensor(value(id).shape(), 0.0);
    return n.grad;
  }
  bool has_grad(std::size_t id) const { return nodes_[id].grad.size() > 0; }

  // Reverse sweep from a scalar root with seed 1.
  void backward(Var root) {
    if (!record_) throw Error("backward on a graph built without recording");
    if (value(root.id()).size() != 1)
      throw ShapeError("backward needs a scalar root, got " + shape_string(value(root.id()).shape()));
    grad(root.id())[0] += 1.0;
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && n.grad.size() > 0) n.backward(*this, i);
    }
  }

  // Gradient reached by a parameter leaf; zeros if it was not used.
  Tensor parameter_grad(const Parameter& p) const {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) {
      const Node& n = nodes_[it->second];
      if (n.grad.size() > 0) return n.grad;
    }
    return Tensor::zeros_like(p.value);
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* ref = nullptr;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

inline const Tensor& Var::value() const { return graph_->value(id_); }

}  // namespace bemopt::ad
