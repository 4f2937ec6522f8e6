#pragma once

#include <span>
#include <vector>

#include "edac/checkpoint.hpp"
#include "edac/data.hpp"
#include "edac/train.hpp"

namespace edac {

struct SweepRow {
  double eta = 0.0;
  double ac_train = 0.0;
  double robust_acc_test = 0.0;
  bool ok = true;  // false when the epoch diverged; the numeric columns are then NaN
};

/// For each eta: continue the checkpoint for exactly one EDAC epoch with that
/// step size, then measure training-set AC (train_attack) and test robust
/// accuracy (eval_attack).
std::vector<SweepRow> stepsize_sweep(const Checkpoint& start, const Dataset& train, const Dataset& test,
                                     std::span<const double> etas, const TrainConfig& config);

/// Number of adjacent pairs where ac_train increases.
std::size_t count_ac_inversions(std::span<const SweepRow> rows);

/// True when the best robust accuracy occurs strictly inside the sweep.
bool has_interior_robust_peak(std::span<const SweepRow> rows);

}  // namespace edac
