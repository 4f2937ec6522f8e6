#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "edac/graph.hpp"
#include "edac/tensor.hpp"

namespace edac {

enum class Activation { kRelu, kTanh };

const char* activation_name(Activation a) noexcept;
Activation parse_activation(const std::string& name);

/// Feed-forward classifier layout. `layer_widths` lists every affine layer's
/// output width; the last entry is the number of classes.
struct ModelSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> layer_widths;
  Activation activation = Activation::kRelu;
  std::uint64_t init_seed = 0;

  std::size_t num_classes() const { return layer_widths.empty() ? 0 : layer_widths.back(); }
  std::size_t num_layers() const { return layer_widths.size(); }
  /// Throws ConfigError when a width is zero or there are fewer than 2 classes.
  void validate() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Ordered named parameter segments ("w0", "b0", "w1", ...). Arithmetic
/// helpers require identical layouts.
class ParamVector {
 public:
  struct Segment {
    std::string name;
    Tensor value;
    friend bool operator==(const Segment&, const Segment&) = default;
  };

  ParamVector() = default;
  explicit ParamVector(std::vector<Segment> segments) : segments_(std::move(segments)) {}

  /// Zero-filled vector laid out for `spec`.
  static ParamVector zeros(const ModelSpec& spec);

  std::span<const Segment> segments() const noexcept { return segments_; }
  std::span<Segment> segments() noexcept { return segments_; }
  const Tensor& operator[](std::size_t i) const { return segments_[i].value; }
  Tensor& operator[](std::size_t i) { return segments_[i].value; }
  std::size_t num_segments() const noexcept { return segments_.size(); }

  /// Total number of scalars across segments.
  std::size_t size() const noexcept;

  std::vector<double> flatten() const;
  /// Inverse of flatten() using `layout` for names and shapes.
  static ParamVector unflatten(const ParamVector& layout, std::span<const double> flat);

  bool same_layout(const ParamVector& other) const noexcept;

  /// this += scale * other
  ParamVector& axpy(double scale, const ParamVector& other);
  ParamVector scaled(double scale) const;

  bool all_finite() const noexcept;
  double max_abs() const noexcept;

  friend ParamVector operator+(ParamVector a, const ParamVector& b) { return a.axpy(1.0, b); }
  friend ParamVector operator-(ParamVector a, const ParamVector& b) { return a.axpy(-1.0, b); }
  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<Segment> segments_;
};

bool bitwise_equal(const ParamVector& a, const ParamVector& b) noexcept;

struct ModelState {
  ModelSpec spec;
  ParamVector params;

  /// Throws ShapeError when params do not match the spec layout.
  void validate() const;
};

/// Largest |w| produced by init_model for a layer with the given fan-in.
double init_bound(std::size_t fan_in);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias, drawn
/// layer by layer (weights row-major, then biases) from one mt19937_64
/// stream seeded with spec.init_seed.
ModelState init_model(const ModelSpec& spec);

/// Logits for x of shape [n] (returns [K]) or [B, n] (returns [B, K]).
Tensor forward_logits(const ModelState& model, const Tensor& x);

/// Index of the largest logit; ties go to the lowest index.
std::size_t argmax(std::span<const double> logits);
Label predict_label(const ModelState& model, const Tensor& x);
std::vector<Label> predict_labels(const ModelState& model, const Tensor& inputs);

/// A model's parameters recorded on a graph, ready to build losses from.
class GraphModel {
 public:
  GraphModel(Graph& graph, const ModelState& model, bool differentiable_params);

  Graph& graph() const { return *graph_; }
  const ModelSpec& spec() const { return *spec_; }
  std::span<const Var> params() const { return params_; }

  /// [B, n] -> [B, K]
  Var logits(Var inputs) const;

 private:
  Graph* graph_;
  const ModelSpec* spec_;
  std::vector<Var> params_;
};

struct Batch {
  Tensor inputs;  // [B, n]
  std::vector<Label> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

/// Scalar-valued loss of (model, inputs, labels) built from graph primitives.
using Loss = std::function<Var(const GraphModel& model, Var inputs, std::span<const Label> labels)>;

/// Mean softmax cross-entropy of the batch.
Loss mean_cross_entropy_loss();

double loss_value(const Loss& loss, const ModelState& model, const Batch& batch);

/// Reverse-mode gradient of `loss` with respect to every parameter segment.
ParamVector grad_params(const Loss& loss, const ModelState& model, const Batch& batch);

/// Reverse-mode gradient of `loss` with respect to the inputs, parameters fixed.
/// Accepts [n] or [B, n]; the result has the same shape as `inputs`.
Tensor grad_input(const Loss& loss, const ModelState& model, const Tensor& inputs,
                  std::span<const Label> labels);

/// Treats a rank-1 input as a one-row batch.
Tensor as_batch(const Tensor& x);

}  // namespace edac
