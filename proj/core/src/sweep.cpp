#include "edac/sweep.hpp"

#include <cmath>
#include <limits>

#include "edac/diagnostics.hpp"
#include "edac/error.hpp"

namespace edac {

std::vector<SweepRow> stepsize_sweep(const Checkpoint& start, const Dataset& train, const Dataset& test,
                                     std::span<const double> etas, const TrainConfig& config) {
  if (etas.empty()) throw ConfigError("stepsize_sweep needs at least one eta");
  for (double eta : etas) {
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw ConfigError("stepsize_sweep etas must be finite and >= 0");
  }
  start.model.validate();
  AttackConfig train_probe = config.train_attack;
  train_probe.seed = eval_attack_seed(config.seed);
  AttackConfig test_probe = config.eval_attack;
  test_probe.seed = eval_attack_seed(config.seed);

  std::vector<SweepRow> rows;
  rows.reserve(etas.size());
  for (double eta : etas) {
    TrainConfig cfg = config;
    cfg.method = Method::kEdac;
    cfg.edac_eta = eta;
    cfg.edac_eta_follows_lr = false;  // the swept value is applied as given
    TrainState state{start.model, OptimizerState{start.optimizer_momentum}, start.epoch};
    if (state.opt.momentum.num_segments() == 0) state.opt = OptimizerState::zeros(start.model.spec);
    SweepRow row{eta, 0.0, 0.0, true};
    try {
      run_epoch(state, cfg, train);
      row.ac_train = dataset_certainty(state.model, train, train_probe).mean;
      row.robust_acc_test = robust_accuracy(state.model, test, test_probe);
      row.ok = std::isfinite(row.ac_train) && std::isfinite(row.robust_acc_test);
    } catch (const NumericError&) {
      row.ok = false;
    }
    if (!row.ok) {
      row.ac_train = std::numeric_limits<double>::quiet_NaN();
      row.robust_acc_test = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }
  return rows;
}

std::size_t count_ac_inversions(std::span<const SweepRow> rows) {
  std::size_t inversions = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].ac_train <= rows[i - 1].ac_train)) ++inversions;
  }
  return inversions;
}

bool has_interior_robust_peak(std::span<const SweepRow> rows) {
  if (rows.size() < 3) return false;
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].robust_acc_test > rows[best].robust_acc_test) best = i;
  }
  return best > 0 && best + 1 < rows.size() && rows[best].robust_acc_test > rows.front().robust_acc_test &&
         rows[best].robust_acc_test > rows.back().robust_acc_test;
}

}  // namespace edac
