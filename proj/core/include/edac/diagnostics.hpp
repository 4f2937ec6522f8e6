#pragma once

#include <span>
#include <vector>

#include "edac/attack.hpp"
#include "edac/checkpoint.hpp"
#include "edac/data.hpp"
#include "edac/metrics.hpp"
#include "edac/model.hpp"
#include "edac/objective.hpp"

namespace edac {

/// Row-normalised predicted-label distribution per ground-truth class.
struct Heatmap {
  std::size_t num_classes = 0;
  std::vector<double> matrix;        // [K*K], row j = ground truth, column k = prediction
  std::vector<std::size_t> counts;   // examples per ground-truth class

  double at(std::size_t j, std::size_t k) const { return matrix[j * num_classes + k]; }
  std::span<const double> row(std::size_t j) const {
    return std::span<const double>(matrix).subspan(j * num_classes, num_classes);
  }
  /// True when the class never occurs; its row is all zeros.
  bool row_empty(std::size_t j) const { return counts[j] == 0; }
};

/// Predictions, accuracy and certainty from one attack pass over a dataset.
struct EvalResult {
  double clean_accuracy = 0.0;
  double robust_accuracy = 0.0;
  std::vector<Label> adversarial_predictions;
  CertaintyReport certainty;
};

/// Attacks in chunks of kEvalChunk rows; chunk c uses seed derive_seed({attack.seed, c}).
inline constexpr std::size_t kEvalChunk = 256;

EvalResult evaluate(const ModelState& model, const Dataset& dataset, const AttackConfig& attack);

double clean_accuracy(const ModelState& model, const Dataset& dataset);

/// 1 - mean 1(prediction on attacked input != label); the attack stands in
/// for the exact inner maximum.
double robust_accuracy(const ModelState& model, const Dataset& dataset, const AttackConfig& attack);

/// Certainty of the dataset under the same chunked attack as robust_accuracy.
CertaintyReport dataset_certainty(const ModelState& model, const Dataset& dataset, const AttackConfig& attack);

Heatmap heatmap_from_predictions(std::span<const Label> truth, std::span<const Label> predicted,
                                 std::size_t num_classes);

Heatmap compute_heatmap(const ModelState& model, const Dataset& dataset, const AttackConfig& attack);

/// Population std of each heatmap row.
std::vector<double> label_level_variance(const Heatmap& heatmap);

/// Mean over non-empty rows.
double mean_label_level_variance(const Heatmap& heatmap);

struct OverfittingGap {
  double best_robust = 0.0;
  double last_robust = 0.0;
  double gap = 0.0;
};

OverfittingGap overfitting_gap(std::span<const MetricsRecord> history);

/// AC(last) - AC(best) on the dataset.
double certainty_gap(const Checkpoint& best, const Checkpoint& last, const Dataset& dataset,
                     const AttackConfig& attack);

}  // namespace edac
