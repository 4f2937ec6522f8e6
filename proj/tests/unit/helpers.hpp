#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "edac/attack.hpp"
#include "edac/data.hpp"
#include "edac/model.hpp"
#include "edac/random.hpp"
#include "edac/train.hpp"

namespace edac::testing {

inline Tensor random_matrix(std::size_t rows, std::size_t cols, Engine& engine, double scale = 1.0) {
  Tensor t(Shape{rows, cols});
  for (double& v : t.storage()) v = uniform(engine, -scale, scale);
  return t;
}

inline std::vector<Label> random_labels(std::size_t n, std::size_t k, Engine& engine) {
  std::vector<Label> labels(n);
  for (auto& y : labels) y = static_cast<Label>(uniform_index(engine, k));
  return labels;
}

/// Model with hand-chosen parameters; `flat` follows the w0, b0, w1, b1 order.
inline ModelState model_from(ModelSpec spec, const std::vector<double>& flat) {
  const ParamVector layout = ParamVector::zeros(spec);
  return ModelState{spec, ParamVector::unflatten(layout, flat)};
}

inline ModelState linear_model(std::size_t n, std::size_t k, std::uint64_t seed) {
  return init_model(ModelSpec{n, {k}, Activation::kRelu, seed});
}

inline Dataset small_mixture(std::size_t per_class = 40, std::uint64_t seed = 3) {
  GaussianMixtureSpec spec;
  spec.num_classes = 3;
  spec.input_dim = 5;
  spec.per_class = per_class;
  spec.class_separation = 3.0;
  spec.noise_std = 1.0;
  spec.seed = seed;
  return make_gaussian_mixture(spec);
}

inline AttackConfig linf_pgd(double eps, std::size_t steps, double alpha) {
  AttackConfig a;
  a.kind = AttackKind::kPgd;
  a.norm = Norm::kLinf;
  a.epsilon = eps;
  a.steps = steps;
  a.step_size = alpha;
  return a;
}

inline TrainConfig small_train_config(Method method) {
  TrainConfig c;
  c.method = method;
  c.epochs = 3;
  c.batch_size = 16;
  c.lr = 0.05;
  c.momentum = 0.9;
  c.lr_decay_epochs = {2};
  c.train_attack = linf_pgd(0.3, 3, 0.1);
  c.eval_attack = linf_pgd(0.3, 3, 0.1);
  c.seed = 5;
  return c;
}

inline ModelSpec small_spec(std::size_t n, std::size_t k, std::uint64_t seed = 9) {
  return ModelSpec{n, {8, k}, Activation::kRelu, seed};
}

}  // namespace edac::testing
