#include "edac/attack.hpp"

#include <algorithm>
#include <cmath>

#include "edac/error.hpp"
#include "edac/random.hpp"

namespace edac {

const char* norm_name(Norm n) noexcept { return n == Norm::kLinf ? "linf" : "l2"; }

Norm parse_norm(const std::string& name) {
  if (name == "linf") return Norm::kLinf;
  if (name == "l2") return Norm::kL2;
  throw ConfigError("unknown norm '" + name + "' (expected linf or l2)");
}

const char* attack_kind_name(AttackKind k) noexcept { return k == AttackKind::kPgd ? "pgd" : "fgsm"; }

AttackKind parse_attack_kind(const std::string& name) {
  if (name == "pgd") return AttackKind::kPgd;
  if (name == "fgsm") return AttackKind::kFgsm;
  throw ConfigError("unknown attack kind '" + name + "' (expected pgd or fgsm)");
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("attack epsilon must be finite and >= 0");
  if (kind == AttackKind::kPgd && steps > 0 && !(step_size > 0.0)) {
    throw ConfigError("attack step_size must be > 0 when steps > 0");
  }
  if (kind == AttackKind::kFgsm && norm != Norm::kLinf) throw ConfigError("fgsm is defined for the linf norm only");
  if (domain_clamp && !(domain_clamp->lo <= domain_clamp->hi)) throw ConfigError("domain clamp needs lo <= hi");
}

double perturbation_norm(std::span<const double> a, std::span<const double> b, Norm norm) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    acc = norm == Norm::kLinf ? std::max(acc, d) : acc + d * d;
  }
  return norm == Norm::kLinf ? acc : std::sqrt(acc);
}

namespace {

void project_row(std::span<double> x, std::span<const double> c, const AttackConfig& config) {
  const double eps = config.epsilon;
  if (config.norm == Norm::kLinf) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], c[i] - eps, c[i] + eps);
  } else {
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sq += (x[i] - c[i]) * (x[i] - c[i]);
    const double norm = std::sqrt(sq);
    if (norm > eps) {
      const double scale = eps / norm;
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = c[i] + (x[i] - c[i]) * scale;
    }
  }
  if (config.domain_clamp) {
    for (double& v : x) v = std::clamp(v, config.domain_clamp->lo, config.domain_clamp->hi);
  }
}

Tensor ce_input_gradient(const ModelState& model, const Tensor& x, std::span<const Label> labels) {
  // Summed so each row's gradient is that example's own CE gradient.
  static const Loss kSummedCe = [](const GraphModel& m, Var inputs, std::span<const Label> y) {
    return sum(cross_entropy(m.logits(inputs), y));
  };
  Tensor g = grad_input(kSummedCe, model, x, labels);
  if (!g.all_finite()) throw NumericError("non-finite input gradient during attack");
  return g;
}

// One ascent step from `current` followed by projection around `center`.
void ascent_step(const ModelState& model, Tensor& current, const Tensor& center, std::span<const Label> labels,
                 double step, const AttackConfig& config) {
  const Tensor g = ce_input_gradient(model, current, labels);
  for (std::size_t r = 0; r < current.rows(); ++r) {
    auto xr = current.row(r);
    auto gr = g.row(r);
    if (config.norm == Norm::kLinf) {
      for (std::size_t i = 0; i < xr.size(); ++i) {
        const double s = gr[i] > 0.0 ? 1.0 : (gr[i] < 0.0 ? -1.0 : 0.0);
        xr[i] += step * s;
      }
    } else {
      double sq = 0.0;
      for (double v : gr) sq += v * v;
      const double norm = std::sqrt(sq);
      if (norm > 0.0) {
        for (std::size_t i = 0; i < xr.size(); ++i) xr[i] += step * gr[i] / norm;
      }
    }
    project_row(xr, center.row(r), config);
  }
}

void random_start(Tensor& x, const Tensor& center, const AttackConfig& config) {
  Engine engine(config.seed);
  const std::size_t n = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    if (config.norm == Norm::kLinf) {
      for (double& v : xr) v += uniform(engine, -config.epsilon, config.epsilon);
    } else {
      // Uniform in the L2 ball: Gaussian direction, radius eps * U^(1/n).
      std::vector<double> dir(n);
      double sq = 0.0;
      for (double& d : dir) {
        d = standard_normal(engine);
        sq += d * d;
      }
      const double radius = config.epsilon * std::pow(uniform01(engine), 1.0 / static_cast<double>(n));
      const double scale = sq > 0.0 ? radius / std::sqrt(sq) : 0.0;
      for (std::size_t i = 0; i < n; ++i) xr[i] += scale * dir[i];
    }
    project_row(xr, center.row(r), config);
  }
}

void check_attack_inputs(const ModelState& model, const Tensor& x, std::span<const Label> labels) {
  const Tensor b = as_batch(x);
  if (b.cols() != model.spec.input_dim) {
    throw ShapeError("attack input shape " + shape_string(x.shape()) + " does not match model input_dim");
  }
  if (labels.size() != b.rows()) throw ShapeError("attack: label count does not match batch size");
}

Tensor restore_shape(Tensor out, const Tensor& like) {
  return like.rank() == 1 ? out.reshaped(like.shape()) : out;
}

}  // namespace

Tensor project_ball(const Tensor& x_prime, const Tensor& center, const AttackConfig& config) {
  if (x_prime.shape() != center.shape()) {
    throw ShapeError("project_ball: " + shape_string(x_prime.shape()) + " vs " + shape_string(center.shape()));
  }
  Tensor out = as_batch(x_prime);
  const Tensor c = as_batch(center);
  for (std::size_t r = 0; r < out.rows(); ++r) project_row(out.row(r), c.row(r), config);
  return restore_shape(std::move(out), x_prime);
}

Tensor fgsm(const ModelState& model, const Tensor& x, std::span<const Label> labels, const AttackConfig& config) {
  config.validate();
  if (config.norm != Norm::kLinf) throw ConfigError("fgsm is defined for the linf norm only");
  check_attack_inputs(model, x, labels);
  const Tensor center = as_batch(x);
  Tensor current = center;
  ascent_step(model, current, center, labels, config.epsilon, config);
  return restore_shape(std::move(current), x);
}

Tensor pgd(const ModelState& model, const Tensor& x, std::span<const Label> labels, const AttackConfig& config) {
  config.validate();
  check_attack_inputs(model, x, labels);
  const Tensor center = as_batch(x);
  Tensor current = center;
  if (config.random_start && config.epsilon > 0.0) random_start(current, center, config);
  for (std::size_t s = 0; s < config.steps; ++s) {
    ascent_step(model, current, center, labels, config.step_size, config);
  }
  return restore_shape(std::move(current), x);
}

Tensor attack(const ModelState& model, const Tensor& x, std::span<const Label> labels, const AttackConfig& config) {
  return config.kind == AttackKind::kFgsm ? fgsm(model, x, labels, config) : pgd(model, x, labels, config);
}

AdversarialBatch generate_batch(const ModelState& model, const Batch& batch, const AttackConfig& config) {
  if (batch.size() == 0) throw ShapeError("generate_batch: empty batch");
  Tensor originals = as_batch(batch.inputs);
  Tensor perturbed = attack(model, originals, batch.labels, config);
  return AdversarialBatch{std::move(originals), std::move(perturbed), batch.labels, config};
}

}  // namespace edac
