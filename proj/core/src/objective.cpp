#include "edac/objective.hpp"

#include <algorithm>
#include <cmath>

#include "edac/error.hpp"

namespace edac {

const char* objective_name(ObjectiveKind k) noexcept { return k == ObjectiveKind::kAtCe ? "at_ce" : "trades"; }

ObjectiveKind parse_objective(const std::string& name) {
  if (name == "at_ce") return ObjectiveKind::kAtCe;
  if (name == "trades") return ObjectiveKind::kTrades;
  throw ConfigError("unknown objective '" + name + "' (expected at_ce or trades)");
}

void Objective::validate() const {
  if (kind == ObjectiveKind::kTrades && !(std::isfinite(trades_beta) && trades_beta > 0.0)) {
    throw ConfigError("trades_beta must be finite and > 0");
  }
}

double var_functional(std::span<const double> u) {
  if (u.empty()) throw ShapeError("var_functional of an empty vector");
  // Deviations are taken from u[0] first so a constant vector gives exactly 0.
  double mu = 0.0;
  for (double v : u) mu += v - u[0];
  mu /= static_cast<double>(u.size());
  double ss = 0.0;
  for (double v : u) ss += (v - u[0] - mu) * (v - u[0] - mu);
  return std::sqrt(ss / static_cast<double>(u.size()));
}

namespace {

double log_sum_exp(std::span<const double> row) {
  const double m = *std::max_element(row.begin(), row.end());
  double s = 0.0;
  for (double v : row) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

double cross_entropy(std::span<const double> logits, Label y) {
  if (y >= logits.size()) throw ShapeError("cross_entropy: class index out of range");
  return log_sum_exp(logits) - logits[y];
}

double kl_divergence(std::span<const double> p_logits, std::span<const double> q_logits) {
  if (p_logits.size() != q_logits.size() || p_logits.empty()) throw ShapeError("kl_divergence: shape mismatch");
  const double lse_p = log_sum_exp(p_logits);
  const double lse_q = log_sum_exp(q_logits);
  double kl = 0.0;
  for (std::size_t k = 0; k < p_logits.size(); ++k) {
    const double lp = p_logits[k] - lse_p;
    kl += std::exp(lp) * (lp - (q_logits[k] - lse_q));
  }
  return kl;
}

double trades_loss(const ModelState& model, const Tensor& clean, const Tensor& adv, std::span<const Label> labels,
                   double beta) {
  if (clean.shape() != adv.shape()) throw ShapeError("trades_loss: clean and adversarial batches differ in shape");
  const Tensor lc = forward_logits(model, as_batch(clean));
  const Tensor la = forward_logits(model, as_batch(adv));
  if (labels.size() != lc.rows()) throw ShapeError("trades_loss: label count does not match batch size");
  double ce = 0.0;
  double kl = 0.0;
  for (std::size_t r = 0; r < lc.rows(); ++r) {
    ce += cross_entropy(lc.row(r), labels[r]);
    kl += kl_divergence(lc.row(r), la.row(r));
  }
  const auto n = static_cast<double>(lc.rows());
  return ce / n + beta * (kl / n);
}

Var robust_loss_graph(const GraphModel& model, Var clean, Var adv, std::span<const Label> labels,
                      const Objective& objective) {
  if (objective.kind == ObjectiveKind::kAtCe) return mean(cross_entropy(model.logits(adv), labels));
  Var clean_logits = model.logits(clean);
  Var ce = mean(cross_entropy(clean_logits, labels));
  return ce + objective.trades_beta * mean(kl_divergence(clean_logits, model.logits(adv)));
}

Var certainty_graph(const GraphModel& model, Var adv) { return mean(row_std(model.logits(adv))); }

double robust_loss(const ModelState& model, const AdversarialBatch& adv, const Objective& objective) {
  objective.validate();
  if (objective.kind == ObjectiveKind::kTrades) {
    return trades_loss(model, adv.originals, adv.perturbed, adv.labels, objective.trades_beta);
  }
  const Tensor logits = forward_logits(model, adv.perturbed);
  if (adv.labels.size() != logits.rows()) throw ShapeError("robust_loss: label count does not match batch size");
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) total += cross_entropy(logits.row(r), adv.labels[r]);
  return total / static_cast<double>(logits.rows());
}

ParamVector grad_robust_loss(const ModelState& model, const AdversarialBatch& adv, const Objective& objective) {
  objective.validate();
  const Tensor clean = adv.originals;
  const Objective obj = objective;
  Loss loss = [&clean, obj](const GraphModel& m, Var inputs, std::span<const Label> labels) {
    return robust_loss_graph(m, m.graph().constant(clean), inputs, labels, obj);
  };
  return grad_params(loss, model, Batch{adv.perturbed, adv.labels});
}

CertaintyReport certainty_of(const ModelState& model, const Tensor& adv_inputs, std::span<const Label> labels) {
  const Tensor logits = forward_logits(model, as_batch(adv_inputs));
  if (labels.size() != logits.rows()) throw ShapeError("certainty: label count does not match batch size");
  if (logits.rows() == 0) throw ShapeError("certainty of an empty batch");
  const std::size_t k_classes = model.spec.num_classes();
  CertaintyReport report;
  report.per_example.resize(logits.rows());
  report.per_class_mean.assign(k_classes, 0.0);
  report.per_class_count.assign(k_classes, 0);
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const double v = var_functional(logits.row(r));
    report.per_example[r] = v;
    total += v;
    if (labels[r] >= k_classes) throw ShapeError("certainty: label out of range");
    report.per_class_mean[labels[r]] += v;
    report.per_class_count[labels[r]] += 1;
  }
  report.mean = total / static_cast<double>(logits.rows());
  for (std::size_t k = 0; k < k_classes; ++k) {
    if (report.per_class_count[k] > 0) report.per_class_mean[k] /= static_cast<double>(report.per_class_count[k]);
  }
  return report;
}

CertaintyReport adversarial_certainty(const ModelState& model, const Batch& batch, const AttackConfig& attack_config) {
  if (batch.size() == 0) throw ShapeError("adversarial_certainty: empty batch");
  const Tensor adv = attack(model, as_batch(batch.inputs), batch.labels, attack_config);
  return certainty_of(model, adv, batch.labels);
}

ParamVector grad_certainty_frozen(const ModelState& model, const Tensor& adv_inputs) {
  static const Loss kCertainty = [](const GraphModel& m, Var inputs, std::span<const Label>) {
    return certainty_graph(m, inputs);
  };
  const Tensor batch = as_batch(adv_inputs);
  return grad_params(kCertainty, model, Batch{batch, std::vector<Label>(batch.rows(), 0)});
}

ParamVector grad_adversarial_certainty(const ModelState& model, const Batch& batch, const AttackConfig& attack_config) {
  if (batch.size() == 0) throw ShapeError("grad_adversarial_certainty: empty batch");
  const Tensor adv = attack(model, as_batch(batch.inputs), batch.labels, attack_config);
  return grad_certainty_frozen(model, adv);
}

}  // namespace edac
