#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "edac/tensor.hpp"

namespace edac {

using Label = std::uint32_t;

class Graph;

/// Handle to a node recorded on a Graph. Cheap to copy; only valid while the
/// owning graph is alive.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Primitive set understood by the reverse pass.
enum class OpKind {
  kLeaf,
  kConstant,
  kAffine,       // x[B,n] * W[m,n]^T + b[m]
  kRelu,
  kTanh,
  kLogSoftmax,   // row-wise
  kCrossEntropy, // row-wise softmax cross-entropy against integer labels -> [B]
  kKlDivergence, // row-wise KL(softmax(p) || softmax(q)) -> [B]
  kRowStd,       // row-wise population standard deviation -> [B]
  kMean,         // -> scalar
  kSum,          // -> scalar
  kAdd,
  kScale,
  kSign,         // forward only; differentiating through it is a capability error
};

const char* op_name(OpKind op) noexcept;

/// Single-use reverse-mode tape. Nodes are appended in evaluation order, so
/// the reverse pass is a backwards sweep over the node list.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Differentiable input (parameter or input being attacked).
  Var leaf(Tensor value);
  /// Value treated as fixed by the reverse pass.
  Var constant(Tensor value);

  /// Accumulates d(root)/d(node) for every node upstream of `root`, which
  /// must be a single-element tensor. Throws CapabilityError when the path
  /// to a leaf crosses an op without a gradient rule.
  void backward(Var root);

  /// Gradient of the last backward() root with respect to `v`. Zero-filled
  /// when `v` does not influence the root.
  Tensor grad(Var v) const;

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  friend class Var;
  friend Var affine(Var, Var, Var);
  friend Var relu(Var);
  friend Var tanh(Var);
  friend Var log_softmax(Var);
  friend Var cross_entropy(Var, std::span<const Label>);
  friend Var kl_divergence(Var, Var);
  friend Var row_std(Var);
  friend Var mean(Var);
  friend Var sum(Var);
  friend Var operator+(Var, Var);
  friend Var operator*(double, Var);
  friend Var sign(Var);

  struct Node {
    Node(OpKind op_kind, Tensor v, std::vector<std::size_t> in)
        : op(op_kind), value(std::move(v)), inputs(std::move(in)) {}

    OpKind op;
    Tensor value;
    std::vector<std::size_t> inputs;
    bool requires_grad = false;
    double scalar = 0.0;
    std::vector<Label> labels;
    // Cached row-wise softmax (cross-entropy, KL) reused by the reverse pass.
    Tensor aux;
  };

  Var push(Node node);
  const Node& node(Var v) const { return nodes_[v.id()]; }
  void backward_node(std::size_t id, std::vector<Tensor>& grads) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<bool> live_;
};

Var affine(Var x, Var weight, Var bias);
Var relu(Var x);
Var tanh(Var x);
Var log_softmax(Var logits);
/// Per-row -log softmax(logits)[label].
Var cross_entropy(Var logits, std::span<const Label> labels);
/// Per-row KL(softmax(p) || softmax(q)).
Var kl_divergence(Var p_logits, Var q_logits);
/// Per-row sqrt(mean((u - mean(u))^2)); the subgradient at a constant row is 0.
Var row_std(Var x);
Var mean(Var x);
Var sum(Var x);
Var operator+(Var a, Var b);
Var operator*(double c, Var x);
Var sign(Var x);

}  // namespace edac
