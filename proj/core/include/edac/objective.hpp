#pragma once

#include <span>
#include <string>
#include <vector>

#include "edac/attack.hpp"
#include "edac/model.hpp"

namespace edac {

enum class ObjectiveKind { kAtCe, kTrades };

const char* objective_name(ObjectiveKind k) noexcept;
ObjectiveKind parse_objective(const std::string& name);

struct Objective {
  ObjectiveKind kind = ObjectiveKind::kAtCe;
  double trades_beta = 6.0;

  void validate() const;
  friend bool operator==(const Objective&, const Objective&) = default;
};

struct CertaintyReport {
  std::vector<double> per_example;     // std of each adversarial logit vector
  double mean = 0.0;                   // adversarial certainty
  std::vector<double> per_class_mean;  // keyed by ground-truth label; 0 for absent classes
  std::vector<std::size_t> per_class_count;
};

/// Population standard deviation of u: sqrt(sum_k (u_k - mean(u))^2 / K).
double var_functional(std::span<const double> u);

/// -log softmax(logits)[y], computed with max subtraction.
double cross_entropy(std::span<const double> logits, Label y);

/// KL(softmax(p) || softmax(q)).
double kl_divergence(std::span<const double> p_logits, std::span<const double> q_logits);

/// mean CE(clean) + beta * mean KL(softmax(clean logits) || softmax(adv logits)).
double trades_loss(const ModelState& model, const Tensor& clean, const Tensor& adv, std::span<const Label> labels,
                   double beta);

/// Graph form of the robust loss: mean CE on adv for at_ce, the TRADES
/// combination for trades.
Var robust_loss_graph(const GraphModel& model, Var clean, Var adv, std::span<const Label> labels,
                      const Objective& objective);

/// Graph form of mean_i Var(logits(adv_i)).
Var certainty_graph(const GraphModel& model, Var adv);

double robust_loss(const ModelState& model, const AdversarialBatch& adv, const Objective& objective);
ParamVector grad_robust_loss(const ModelState& model, const AdversarialBatch& adv, const Objective& objective);

/// Certainty of already-generated adversarial inputs (no attack is run).
CertaintyReport certainty_of(const ModelState& model, const Tensor& adv_inputs, std::span<const Label> labels);

/// Attacks the batch with `attack`, then reports per-example and mean
/// logit standard deviation plus the per-ground-truth-class breakdown.
CertaintyReport adversarial_certainty(const ModelState& model, const Batch& batch, const AttackConfig& attack);

/// Gradient of mean Var(logits(x')) with x' held fixed.
ParamVector grad_certainty_frozen(const ModelState& model, const Tensor& adv_inputs);

/// Generates x' at the current parameters, freezes it, and differentiates
/// the mean logit std with respect to the parameters only.
ParamVector grad_adversarial_certainty(const ModelState& model, const Batch& batch, const AttackConfig& attack);

}  // namespace edac
