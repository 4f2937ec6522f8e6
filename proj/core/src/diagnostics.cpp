#include "edac/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "edac/error.hpp"
#include "edac/random.hpp"

namespace edac {

EvalResult evaluate(const ModelState& model, const Dataset& dataset, const AttackConfig& attack_config) {
  if (dataset.size() == 0) throw ShapeError("evaluate: empty dataset");
  const std::size_t n = dataset.size();
  EvalResult out;
  out.adversarial_predictions.resize(n);
  Tensor adv_all(Shape{n, dataset.input_dim()});
  std::size_t clean_hits = 0;
  std::size_t robust_hits = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0, chunk = 0; start < n; start += kEvalChunk, ++chunk) {
    const std::size_t end = std::min(n, start + kEvalChunk);
    idx.clear();
    for (std::size_t i = start; i < end; ++i) idx.push_back(i);
    const Batch batch = dataset.batch(idx);
    AttackConfig cfg = attack_config;
    cfg.seed = derive_seed({attack_config.seed, chunk});
    const Tensor adv = attack(model, batch.inputs, batch.labels, cfg);
    const auto clean_pred = predict_labels(model, batch.inputs);
    const auto adv_pred = predict_labels(model, adv);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      clean_hits += clean_pred[i] == batch.labels[i];
      robust_hits += adv_pred[i] == batch.labels[i];
      out.adversarial_predictions[start + i] = adv_pred[i];
      auto src = adv.row(i);
      std::copy(src.begin(), src.end(), adv_all.row(start + i).begin());
    }
  }
  out.clean_accuracy = static_cast<double>(clean_hits) / static_cast<double>(n);
  out.robust_accuracy = static_cast<double>(robust_hits) / static_cast<double>(n);
  out.certainty = certainty_of(model, adv_all, dataset.labels);
  return out;
}

double clean_accuracy(const ModelState& model, const Dataset& dataset) {
  if (dataset.size() == 0) throw ShapeError("clean_accuracy: empty dataset");
  const auto pred = predict_labels(model, dataset.inputs);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == dataset.labels[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double robust_accuracy(const ModelState& model, const Dataset& dataset, const AttackConfig& attack) {
  return evaluate(model, dataset, attack).robust_accuracy;
}

CertaintyReport dataset_certainty(const ModelState& model, const Dataset& dataset, const AttackConfig& attack) {
  return evaluate(model, dataset, attack).certainty;
}

Heatmap heatmap_from_predictions(std::span<const Label> truth, std::span<const Label> predicted,
                                 std::size_t num_classes) {
  if (truth.size() != predicted.size()) throw ShapeError("heatmap: label and prediction counts differ");
  Heatmap hm;
  hm.num_classes = num_classes;
  hm.matrix.assign(num_classes * num_classes, 0.0);
  hm.counts.assign(num_classes, 0);
  std::vector<std::size_t> hits(num_classes * num_classes, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes) {
      throw ShapeError("heatmap: class index out of range");
    }
    hm.counts[truth[i]] += 1;
    hits[truth[i] * num_classes + predicted[i]] += 1;
  }
  for (std::size_t j = 0; j < num_classes; ++j) {
    if (hm.counts[j] == 0) continue;
    for (std::size_t k = 0; k < num_classes; ++k) {
      hm.matrix[j * num_classes + k] =
          static_cast<double>(hits[j * num_classes + k]) / static_cast<double>(hm.counts[j]);
    }
  }
  return hm;
}

Heatmap compute_heatmap(const ModelState& model, const Dataset& dataset, const AttackConfig& attack) {
  const EvalResult r = evaluate(model, dataset, attack);
  return heatmap_from_predictions(dataset.labels, r.adversarial_predictions, dataset.num_classes);
}

std::vector<double> label_level_variance(const Heatmap& heatmap) {
  std::vector<double> out(heatmap.num_classes, 0.0);
  for (std::size_t j = 0; j < heatmap.num_classes; ++j) out[j] = var_functional(heatmap.row(j));
  return out;
}

double mean_label_level_variance(const Heatmap& heatmap) {
  const auto v = label_level_variance(heatmap);
  double total = 0.0;
  std::size_t rows = 0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (heatmap.row_empty(j)) continue;
    total += v[j];
    ++rows;
  }
  return rows ? total / static_cast<double>(rows) : 0.0;
}

OverfittingGap overfitting_gap(std::span<const MetricsRecord> history) {
  if (history.empty()) throw ShapeError("overfitting_gap: empty history");
  OverfittingGap g;
  g.best_robust = history.front().robust_acc_test;
  for (const auto& row : history) g.best_robust = std::max(g.best_robust, row.robust_acc_test);
  g.last_robust = history.back().robust_acc_test;
  g.gap = g.best_robust - g.last_robust;
  return g;
}

double certainty_gap(const Checkpoint& best, const Checkpoint& last, const Dataset& dataset,
                     const AttackConfig& attack) {
  if (!(best.model.spec == last.model.spec)) throw ConfigError("certainty_gap: checkpoints use different model specs");
  return dataset_certainty(last.model, dataset, attack).mean - dataset_certainty(best.model, dataset, attack).mean;
}

}  // namespace edac
