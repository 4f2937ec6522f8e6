#include "edac/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "edac/error.hpp"

namespace edac {

namespace {

void require_same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw ShapeError("operands belong to different graphs");
}

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(what) + " expects a [rows, cols] operand, got " + shape_string(t.shape()));
  }
}

// Row-wise log-sum-exp with max subtraction.
double log_sum_exp(std::span<const double> row) {
  double m = row[0];
  for (double v : row) m = std::max(m, v);
  double s = 0.0;
  for (double v : row) s += std::exp(v - m);
  return m + std::log(s);
}

// Fills `out` (same shape as `logits`) with row-wise softmax.
void softmax_rows(const Tensor& logits, Tensor& out) {
  out = Tensor(logits.shape());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto o = out.row(r);
    const double lse = log_sum_exp(in);
    for (std::size_t k = 0; k < in.size(); ++k) o[k] = std::exp(in[k] - lse);
  }
}

}  // namespace

const char* op_name(OpKind op) noexcept {
  switch (op) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConstant: return "constant";
    case OpKind::kAffine: return "affine";
    case OpKind::kRelu: return "relu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kCrossEntropy: return "cross_entropy";
    case OpKind::kKlDivergence: return "kl_divergence";
    case OpKind::kRowStd: return "row_std";
    case OpKind::kMean: return "mean";
    case OpKind::kSum: return "sum";
    case OpKind::kAdd: return "add";
    case OpKind::kScale: return "scale";
    case OpKind::kSign: return "sign";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph_->nodes_[id_].value; }

Var Graph::push(Node node) {
  for (std::size_t in : node.inputs) node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::leaf(Tensor value) {
  Node n{OpKind::kLeaf, std::move(value), {}};
  n.requires_grad = true;
  return push(std::move(n));
}

Var Graph::constant(Tensor value) { return push(Node{OpKind::kConstant, std::move(value), {}}); }

namespace {

// Four interleaved partial sums combined in a fixed order: vectorizable, and
// the result depends only on the two rows, never on the batch around them.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += a[j] * b[j];
    s1 += a[j + 1] * b[j + 1];
    s2 += a[j + 2] * b[j + 2];
    s3 += a[j + 3] * b[j + 3];
  }
  double tail = 0.0;
  for (; j < n; ++j) tail += a[j] * b[j];
  return ((s0 + s1) + (s2 + s3)) + tail;
}

}  // namespace

Var affine(Var x, Var weight, Var bias) {
  require_same_graph(x, weight);
  require_same_graph(x, bias);
  const Tensor& xv = x.value();
  const Tensor& w = weight.value();
  const Tensor& b = bias.value();
  require_matrix(w, "affine weight");
  const std::size_t out_dim = w.dim(0);
  const std::size_t in_dim = w.dim(1);
  if (xv.rank() != 2 || xv.dim(1) != in_dim || b.rank() != 1 || b.dim(0) != out_dim) {
    throw ShapeError("affine: input " + shape_string(xv.shape()) + ", weight " + shape_string(w.shape()) +
                     ", bias " + shape_string(b.shape()));
  }
  const std::size_t batch = xv.dim(0);
  Tensor y(Shape{batch, out_dim});
  const double* xp = xv.data().data();
  const double* wp = w.data().data();
  const double* bp = b.data().data();
  double* yp = y.data().data();
  for (std::size_t r = 0; r < batch; ++r) {
    const double* xr = xp + r * in_dim;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wr = wp + o * in_dim;
      yp[r * out_dim + o] = dot(xr, wr, in_dim) + bp[o];
    }
  }
  return x.graph().push(Graph::Node{OpKind::kAffine, std::move(y), {x.id(), weight.id(), bias.id()}});
}

Var relu(Var x) {
  Tensor y = x.value();
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return x.graph().push(Graph::Node{OpKind::kRelu, std::move(y), {x.id()}});
}

Var tanh(Var x) {
  Tensor y = x.value();
  for (double& v : y.data()) v = std::tanh(v);
  return x.graph().push(Graph::Node{OpKind::kTanh, std::move(y), {x.id()}});
}

Var log_softmax(Var logits) {
  const Tensor& in = logits.value();
  require_matrix(in, "log_softmax");
  Tensor y(in.shape());
  for (std::size_t r = 0; r < in.rows(); ++r) {
    const double lse = log_sum_exp(in.row(r));
    auto src = in.row(r);
    auto dst = y.row(r);
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] = src[k] - lse;
  }
  Graph::Node n{OpKind::kLogSoftmax, std::move(y), {logits.id()}};
  return logits.graph().push(std::move(n));
}

Var cross_entropy(Var logits, std::span<const Label> labels) {
  const Tensor& in = logits.value();
  require_matrix(in, "cross_entropy");
  if (labels.size() != in.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(in.rows()) + " rows");
  }
  const std::size_t k_classes = in.cols();
  Tensor loss(Shape{in.rows()});
  Tensor probs;
  softmax_rows(in, probs);
  for (std::size_t r = 0; r < in.rows(); ++r) {
    if (labels[r] >= k_classes) {
      throw ShapeError("cross_entropy: label " + std::to_string(labels[r]) + " out of range for " +
                       std::to_string(k_classes) + " classes");
    }
    loss[r] = log_sum_exp(in.row(r)) - in.at(r, labels[r]);
  }
  Graph::Node n{OpKind::kCrossEntropy, std::move(loss), {logits.id()}};
  n.labels.assign(labels.begin(), labels.end());
  n.aux = std::move(probs);
  return logits.graph().push(std::move(n));
}

Var kl_divergence(Var p_logits, Var q_logits) {
  require_same_graph(p_logits, q_logits);
  const Tensor& p = p_logits.value();
  const Tensor& q = q_logits.value();
  require_matrix(p, "kl_divergence");
  if (p.shape() != q.shape()) {
    throw ShapeError("kl_divergence: " + shape_string(p.shape()) + " vs " + shape_string(q.shape()));
  }
  Tensor out(Shape{p.rows()});
  // aux holds [log p | log q] side by side per row.
  Tensor logs(Shape{p.rows(), 2 * p.cols()});
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const double lse_p = log_sum_exp(p.row(r));
    const double lse_q = log_sum_exp(q.row(r));
    double kl = 0.0;
    for (std::size_t k = 0; k < p.cols(); ++k) {
      const double lp = p.at(r, k) - lse_p;
      const double lq = q.at(r, k) - lse_q;
      logs.at(r, k) = lp;
      logs.at(r, p.cols() + k) = lq;
      kl += std::exp(lp) * (lp - lq);
    }
    out[r] = kl;
  }
  Graph::Node n{OpKind::kKlDivergence, std::move(out), {p_logits.id(), q_logits.id()}};
  n.aux = std::move(logs);
  return p_logits.graph().push(std::move(n));
}

Var row_std(Var x) {
  const Tensor& in = x.value();
  require_matrix(in, "row_std");
  if (in.cols() == 0) throw ShapeError("row_std of an empty row");
  Tensor out(Shape{in.rows()});
  for (std::size_t r = 0; r < in.rows(); ++r) {
    auto u = in.row(r);
    // Anchored at u[0] so a constant row gives exactly 0.
    double mu = 0.0;
    for (double v : u) mu += v - u[0];
    mu /= static_cast<double>(u.size());
    double ss = 0.0;
    for (double v : u) ss += (v - u[0] - mu) * (v - u[0] - mu);
    out[r] = std::sqrt(ss / static_cast<double>(u.size()));
  }
  return x.graph().push(Graph::Node{OpKind::kRowStd, std::move(out), {x.id()}});
}

Var mean(Var x) {
  const Tensor& in = x.value();
  double s = 0.0;
  for (double v : in.data()) s += v;
  return x.graph().push(
      Graph::Node{OpKind::kMean, Tensor::scalar(s / static_cast<double>(in.size())), {x.id()}});
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.graph().push(Graph::Node{OpKind::kSum, Tensor::scalar(s), {x.id()}});
}

Var operator+(Var a, Var b) {
  require_same_graph(a, b);
  if (a.shape() != b.shape()) {
    throw ShapeError("add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  Tensor y = a.value();
  auto bv = b.value().data();
  auto yv = y.data();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] += bv[i];
  return a.graph().push(Graph::Node{OpKind::kAdd, std::move(y), {a.id(), b.id()}});
}

Var operator*(double c, Var x) {
  Tensor y = x.value();
  for (double& v : y.data()) v *= c;
  Graph::Node n{OpKind::kScale, std::move(y), {x.id()}};
  n.scalar = c;
  return x.graph().push(std::move(n));
}

Var sign(Var x) {
  Tensor y = x.value();
  for (double& v : y.data()) v = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
  return x.graph().push(Graph::Node{OpKind::kSign, std::move(y), {x.id()}});
}

void Graph::backward(Var root) {
  if (&root.graph() != this) throw ShapeError("backward root belongs to another graph");
  if (root.value().size() != 1) {
    throw ShapeError("backward root must be a scalar, got " + shape_string(root.shape()));
  }
  grads_.assign(nodes_.size(), Tensor());
  live_.assign(nodes_.size(), false);
  auto& live = live_;
  live[root.id()] = true;
  grads_[root.id()] = Tensor(root.shape(), 1.0);
  for (std::size_t id = root.id() + 1; id-- > 0;) {
    if (!live[id] || !nodes_[id].requires_grad) continue;
    const Node& n = nodes_[id];
    if (n.op == OpKind::kLeaf || n.op == OpKind::kConstant) continue;
    if (n.op == OpKind::kSign) {
      throw CapabilityError("cannot differentiate through primitive '" + std::string(op_name(n.op)) + "'");
    }
    for (std::size_t in : n.inputs) {
      if (nodes_[in].requires_grad && !live[in]) {
        live[in] = true;
        grads_[in] = Tensor(nodes_[in].value.shape());
      }
    }
    backward_node(id, grads_);
  }
}

Tensor Graph::grad(Var v) const {
  if (v.id() < live_.size() && live_[v.id()]) return grads_[v.id()];
  return Tensor(nodes_[v.id()].value.shape());
}

void Graph::backward_node(std::size_t id, std::vector<Tensor>& grads) const {
  const Node& n = nodes_[id];
  const Tensor& g = grads[id];
  auto wants = [&](std::size_t slot) { return nodes_[n.inputs[slot]].requires_grad; };
  auto in_grad = [&](std::size_t slot) -> Tensor& { return grads[n.inputs[slot]]; };

  switch (n.op) {
    case OpKind::kAffine: {
      const Tensor& x = nodes_[n.inputs[0]].value;
      const Tensor& w = nodes_[n.inputs[1]].value;
      const std::size_t batch = x.dim(0);
      const std::size_t in_dim = w.dim(1);
      const std::size_t out_dim = w.dim(0);
      const double* gp = g.data().data();
      if (wants(0)) {
        double* dx = in_grad(0).data().data();
        const double* wp = w.data().data();
        for (std::size_t r = 0; r < batch; ++r) {
          for (std::size_t o = 0; o < out_dim; ++o) {
            const double go = gp[r * out_dim + o];
            const double* wr = wp + o * in_dim;
            double* dxr = dx + r * in_dim;
            for (std::size_t j = 0; j < in_dim; ++j) dxr[j] += go * wr[j];
          }
        }
      }
      if (wants(1)) {
        double* dw = in_grad(1).data().data();
        const double* xp = x.data().data();
        for (std::size_t r = 0; r < batch; ++r) {
          const double* xr = xp + r * in_dim;
          for (std::size_t o = 0; o < out_dim; ++o) {
            const double go = gp[r * out_dim + o];
            double* dwr = dw + o * in_dim;
            for (std::size_t j = 0; j < in_dim; ++j) dwr[j] += go * xr[j];
          }
        }
      }
      if (wants(2)) {
        double* db = in_grad(2).data().data();
        for (std::size_t r = 0; r < batch; ++r) {
          for (std::size_t o = 0; o < out_dim; ++o) db[o] += gp[r * out_dim + o];
        }
      }
      break;
    }
    case OpKind::kRelu: {
      const Tensor& x = nodes_[n.inputs[0]].value;
      auto dx = in_grad(0).data();
      for (std::size_t i = 0; i < dx.size(); ++i) {
        if (x[i] > 0.0) dx[i] += g[i];
      }
      break;
    }
    case OpKind::kTanh: {
      auto dx = in_grad(0).data();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
      break;
    }
    case OpKind::kLogSoftmax: {
      Tensor& dx = in_grad(0);
      for (std::size_t r = 0; r < n.value.rows(); ++r) {
        auto gr = g.row(r);
        auto yr = n.value.row(r);
        double gs = 0.0;
        for (double v : gr) gs += v;
        auto dr = dx.row(r);
        for (std::size_t k = 0; k < yr.size(); ++k) dr[k] += gr[k] - std::exp(yr[k]) * gs;
      }
      break;
    }
    case OpKind::kCrossEntropy: {
      Tensor& dx = in_grad(0);
      for (std::size_t r = 0; r < n.aux.rows(); ++r) {
        auto pr = n.aux.row(r);
        auto dr = dx.row(r);
        const double gr = g[r];
        for (std::size_t k = 0; k < pr.size(); ++k) dr[k] += gr * pr[k];
        dr[n.labels[r]] -= gr;
      }
      break;
    }
    case OpKind::kKlDivergence: {
      const std::size_t k_classes = n.aux.cols() / 2;
      for (std::size_t r = 0; r < n.aux.rows(); ++r) {
        auto logs = n.aux.row(r);
        const double gr = g[r];
        const double kl = n.value[r];
        if (wants(0)) {
          auto dp = in_grad(0).row(r);
          for (std::size_t k = 0; k < k_classes; ++k) {
            const double lp = logs[k];
            dp[k] += gr * std::exp(lp) * (lp - logs[k_classes + k] - kl);
          }
        }
        if (wants(1)) {
          auto dq = in_grad(1).row(r);
          for (std::size_t k = 0; k < k_classes; ++k) {
            dq[k] += gr * (std::exp(logs[k_classes + k]) - std::exp(logs[k]));
          }
        }
      }
      break;
    }
    case OpKind::kRowStd: {
      const Tensor& x = nodes_[n.inputs[0]].value;
      Tensor& dx = in_grad(0);
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const double s = n.value[r];
        if (s == 0.0) continue;
        auto u = x.row(r);
        const auto k_classes = static_cast<double>(u.size());
        double mu = 0.0;
        for (double v : u) mu += v - u[0];
        mu /= k_classes;
        auto dr = dx.row(r);
        const double scale = g[r] / (k_classes * s);
        for (std::size_t k = 0; k < u.size(); ++k) dr[k] += scale * (u[k] - u[0] - mu);
      }
      break;
    }
    case OpKind::kMean: {
      auto dx = in_grad(0).data();
      const double share = g[0] / static_cast<double>(dx.size());
      for (double& v : dx) v += share;
      break;
    }
    case OpKind::kSum: {
      for (double& v : in_grad(0).data()) v += g[0];
      break;
    }
    case OpKind::kAdd: {
      for (std::size_t slot = 0; slot < 2; ++slot) {
        if (!wants(slot)) continue;
        auto dx = in_grad(slot).data();
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i];
      }
      break;
    }
    case OpKind::kScale: {
      auto dx = in_grad(0).data();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += n.scalar * g[i];
      break;
    }
    case OpKind::kLeaf:
    case OpKind::kConstant:
    case OpKind::kSign:
      break;
  }
}

}  // namespace edac
