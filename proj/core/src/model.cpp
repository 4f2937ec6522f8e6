#include "edac/model.hpp"

#include <cmath>
#include <cstring>

#include "edac/error.hpp"
#include "edac/random.hpp"

namespace edac {

const char* activation_name(Activation a) noexcept {
  return a == Activation::kRelu ? "relu" : "tanh";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + name + "' (expected relu or tanh)");
}

void ModelSpec::validate() const {
  if (input_dim == 0) throw ConfigError("model input_dim must be positive");
  if (layer_widths.empty()) throw ConfigError("model needs at least one layer");
  for (std::size_t w : layer_widths) {
    if (w == 0) throw ConfigError("model layer widths must be positive");
  }
  if (num_classes() < 2) throw ConfigError("model needs at least 2 output classes");
}

ParamVector ParamVector::zeros(const ModelSpec& spec) {
  std::vector<Segment> segs;
  std::size_t fan_in = spec.input_dim;
  for (std::size_t l = 0; l < spec.layer_widths.size(); ++l) {
    const std::size_t out = spec.layer_widths[l];
    segs.push_back({"w" + std::to_string(l), Tensor(Shape{out, fan_in})});
    segs.push_back({"b" + std::to_string(l), Tensor(Shape{out})});
    fan_in = out;
  }
  return ParamVector(std::move(segs));
}

std::size_t ParamVector::size() const noexcept {
  std::size_t n = 0;
  for (const auto& s : segments_) n += s.value.size();
  return n;
}

std::vector<double> ParamVector::flatten() const {
  std::vector<double> flat;
  flat.reserve(size());
  for (const auto& s : segments_) flat.insert(flat.end(), s.value.data().begin(), s.value.data().end());
  return flat;
}

ParamVector ParamVector::unflatten(const ParamVector& layout, std::span<const double> flat) {
  if (flat.size() != layout.size()) {
    throw ShapeError("unflatten: " + std::to_string(flat.size()) + " values for a layout of " +
                     std::to_string(layout.size()));
  }
  ParamVector out = layout;
  std::size_t offset = 0;
  for (auto& s : out.segments_) {
    auto dst = s.value.data();
    std::memcpy(dst.data(), flat.data() + offset, dst.size() * sizeof(double));
    offset += dst.size();
  }
  return out;
}

bool ParamVector::same_layout(const ParamVector& other) const noexcept {
  if (segments_.size() != other.segments_.size()) return false;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (segments_[i].name != other.segments_[i].name ||
        segments_[i].value.shape() != other.segments_[i].value.shape()) {
      return false;
    }
  }
  return true;
}

ParamVector& ParamVector::axpy(double scale, const ParamVector& other) {
  if (!same_layout(other)) throw ShapeError("parameter vectors have different layouts");
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    auto dst = segments_[i].value.data();
    auto src = other.segments_[i].value.data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
  }
  return *this;
}

ParamVector ParamVector::scaled(double scale) const {
  ParamVector out = *this;
  for (auto& s : out.segments_) {
    for (double& v : s.value.data()) v *= scale;
  }
  return out;
}

bool ParamVector::all_finite() const noexcept {
  for (const auto& s : segments_) {
    if (!s.value.all_finite()) return false;
  }
  return true;
}

double ParamVector::max_abs() const noexcept {
  double m = 0.0;
  for (const auto& s : segments_) {
    for (double v : s.value.data()) m = std::max(m, std::abs(v));
  }
  return m;
}

bool bitwise_equal(const ParamVector& a, const ParamVector& b) noexcept {
  if (!a.same_layout(b)) return false;
  for (std::size_t i = 0; i < a.num_segments(); ++i) {
    if (!bitwise_equal(a[i], b[i])) return false;
  }
  return true;
}

void ModelState::validate() const {
  spec.validate();
  if (!params.same_layout(ParamVector::zeros(spec))) {
    throw ShapeError("model parameters do not match the model spec");
  }
}

double init_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

ModelState init_model(const ModelSpec& spec) {
  spec.validate();
  ModelState model{spec, ParamVector::zeros(spec)};
  Engine engine(spec.init_seed);
  std::size_t fan_in = spec.input_dim;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const double bound = init_bound(fan_in);
    for (std::size_t seg = 2 * l; seg <= 2 * l + 1; ++seg) {
      for (double& v : model.params[seg].data()) v = uniform(engine, -bound, bound);
    }
    fan_in = spec.layer_widths[l];
  }
  return model;
}

GraphModel::GraphModel(Graph& graph, const ModelState& model, bool differentiable_params)
    : graph_(&graph), spec_(&model.spec) {
  params_.reserve(model.params.num_segments());
  for (const auto& seg : model.params.segments()) {
    params_.push_back(differentiable_params ? graph.leaf(seg.value) : graph.constant(seg.value));
  }
}

Var GraphModel::logits(Var inputs) const {
  const std::size_t layers = spec_->num_layers();
  Var h = inputs;
  for (std::size_t l = 0; l < layers; ++l) {
    h = affine(h, params_[2 * l], params_[2 * l + 1]);
    if (l + 1 < layers) h = spec_->activation == Activation::kRelu ? relu(h) : tanh(h);
  }
  return h;
}

Tensor as_batch(const Tensor& x) {
  if (x.rank() == 1) return x.reshaped(Shape{1, x.size()});
  if (x.rank() == 2) return x;
  throw ShapeError("expected input of shape [n] or [B, n], got " + shape_string(x.shape()));
}

namespace {

void check_input(const ModelState& model, const Tensor& x) {
  const std::size_t n = model.spec.input_dim;
  const bool ok = (x.rank() == 1 && x.dim(0) == n) || (x.rank() == 2 && x.dim(1) == n);
  if (!ok) {
    throw ShapeError("input shape " + shape_string(x.shape()) + " does not match model input_dim " +
                     std::to_string(n));
  }
}

}  // namespace

Tensor forward_logits(const ModelState& model, const Tensor& x) {
  check_input(model, x);
  Graph graph;
  GraphModel gm(graph, model, false);
  Tensor out = gm.logits(graph.constant(as_batch(x))).value();
  if (x.rank() == 1) return out.reshaped(Shape{model.spec.num_classes()});
  return out;
}

std::size_t argmax(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < logits.size(); ++k) {
    if (logits[k] > logits[best]) best = k;
  }
  return best;
}

Label predict_label(const ModelState& model, const Tensor& x) {
  if (x.rank() != 1) throw ShapeError("predict_label expects a single input of shape [n]");
  const Tensor logits = forward_logits(model, x);
  return static_cast<Label>(argmax(logits.data()));
}

std::vector<Label> predict_labels(const ModelState& model, const Tensor& inputs) {
  const Tensor logits = forward_logits(model, as_batch(inputs));
  std::vector<Label> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) out[r] = static_cast<Label>(argmax(logits.row(r)));
  return out;
}

Loss mean_cross_entropy_loss() {
  return [](const GraphModel& m, Var inputs, std::span<const Label> labels) {
    return mean(cross_entropy(m.logits(inputs), labels));
  };
}

double loss_value(const Loss& loss, const ModelState& model, const Batch& batch) {
  check_input(model, batch.inputs);
  Graph graph;
  GraphModel gm(graph, model, false);
  return loss(gm, graph.constant(as_batch(batch.inputs)), batch.labels).value().item();
}

ParamVector grad_params(const Loss& loss, const ModelState& model, const Batch& batch) {
  check_input(model, batch.inputs);
  Graph graph;
  GraphModel gm(graph, model, true);
  Var root = loss(gm, graph.constant(as_batch(batch.inputs)), batch.labels);
  graph.backward(root);
  ParamVector grads = ParamVector::zeros(model.spec);
  for (std::size_t i = 0; i < grads.num_segments(); ++i) grads[i] = graph.grad(gm.params()[i]);
  return grads;
}

Tensor grad_input(const Loss& loss, const ModelState& model, const Tensor& inputs,
                  std::span<const Label> labels) {
  check_input(model, inputs);
  Graph graph;
  GraphModel gm(graph, model, false);
  Var x = graph.leaf(as_batch(inputs));
  graph.backward(loss(gm, x, labels));
  Tensor g = graph.grad(x);
  return inputs.rank() == 1 ? g.reshaped(inputs.shape()) : g;
}

}  // namespace edac
