#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "edac/attack.hpp"
#include "edac/checkpoint.hpp"
#include "edac/data.hpp"
#include "edac/error.hpp"
#include "edac/metrics.hpp"
#include "edac/model.hpp"
#include "edac/objective.hpp"

namespace edac {

struct TrainConfig {
  Method method = Method::kAt;
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double lr = 0.1;
  double momentum = 0.9;
  std::vector<std::size_t> lr_decay_epochs;
  double lr_decay_factor = 0.1;
  double edac_eta = 0.1;
  // Halve eta (at most 20 times) until the half step lowers the frozen-batch AC.
  bool edac_backoff = false;
  // Multiply eta by the same decay factors as the learning rate.
  bool edac_eta_follows_lr = false;
  double edac_reg_lambda = 0.5;
  Objective objective;
  AttackConfig train_attack;
  AttackConfig eval_attack;
  std::uint64_t seed = 0;

  void validate() const;
};

struct OptimizerState {
  ParamVector momentum;

  static OptimizerState zeros(const ModelSpec& spec) { return {ParamVector::zeros(spec)}; }
};

/// Per-batch values that the training loop derives from (seed, epoch, batch).
struct StepContext {
  double lr = 0.0;
  std::uint64_t attack_seed = 0;
  // Multiplier on config.edac_eta for this step.
  double eta_scale = 1.0;
};

struct SgdResult {
  ParamVector params;
  ParamVector momentum;
};

/// v <- m * v + g; theta <- theta - lr * v.
SgdResult sgd_step(const ParamVector& params, const ParamVector& grad, double lr, double momentum,
                   const ParamVector& momentum_buffer);

/// Base lr times decay_factor^(number of decay epochs <= epoch). Epochs are 1-based.
double lr_at_epoch(const TrainConfig& config, std::size_t epoch);

struct StepResult {
  ModelState model;
  OptimizerState opt;
};

/// Certainty bookkeeping for one extragradient step.
struct HalfStepReport {
  double ac_before = 0.0;       // AC(theta_t) on the batch attacked at theta_t
  double ac_half_frozen = 0.0;  // AC(theta_{t+0.5}) on those same frozen inputs
  double ac_half = 0.0;         // AC(theta_{t+0.5}) on inputs re-attacked at theta_{t+0.5}
  double eta = 0.0;             // step actually taken
  int halvings = 0;
};

struct EdacStepResult {
  ModelState model;
  OptimizerState opt;
  HalfStepReport report;
};

StepResult at_update(const ModelState& model, const Batch& batch, const TrainConfig& config,
                     const OptimizerState& opt, const StepContext& ctx);

/// theta_{t+0.5} = theta_t - eta * grad AC (momentum-free, attack frozen),
/// then one SGD step on the robust loss of inputs re-attacked at theta_{t+0.5}.
EdacStepResult edac_update(const ModelState& model, const Batch& batch, const TrainConfig& config,
                           const OptimizerState& opt, const StepContext& ctx);

/// Single SGD step on robust_loss + lambda * AC, both on inputs attacked once at theta_t.
StepResult edac_reg_update(const ModelState& model, const Batch& batch, const TrainConfig& config,
                           const OptimizerState& opt, const StepContext& ctx);

struct TrainState {
  ModelState model;
  OptimizerState opt;
  std::size_t epoch = 0;  // completed epochs
};

/// Runs epoch `state.epoch + 1` with config.method and advances the state.
/// `half_steps`, when given, receives one report per EDAC batch.
void run_epoch(TrainState& state, const TrainConfig& config, const Dataset& train,
               std::vector<HalfStepReport>* half_steps = nullptr);

struct TrainResult {
  Checkpoint final;
  Checkpoint best;  // highest robust_acc_test; earliest epoch wins ties
  std::vector<MetricsRecord> history;
};

struct TrainOptions {
  /// Stop early (after this many completed epochs) without changing any
  /// other behaviour; used to split a run across a checkpoint.
  std::optional<std::size_t> stop_after_epoch;
  std::function<void(const MetricsRecord&)> on_epoch;
};

struct ResumeFrom {
  Checkpoint last;
  std::optional<Checkpoint> best;
};

/// Raised when an epoch fails numerically; carries the checkpoint of the
/// last completed epoch (epoch 0 is the initial model).
class TrainingAborted : public NumericError {
 public:
  TrainingAborted(const std::string& what, std::size_t failed_epoch, Checkpoint last_completed)
      : NumericError(what), failed_epoch_(failed_epoch), last_completed_(std::move(last_completed)) {}

  std::size_t failed_epoch() const noexcept { return failed_epoch_; }
  const Checkpoint& last_completed() const noexcept { return last_completed_; }

 private:
  std::size_t failed_epoch_;
  Checkpoint last_completed_;
};

/// Full loop: per epoch shuffle, per-batch update with config.method, then
/// clean/robust accuracy and AC on both splits under config.eval_attack.
TrainResult train_run(const TrainConfig& config, const ModelSpec& spec, const Dataset& train, const Dataset& test,
                      const TrainOptions& options = {});

/// Continues from a saved checkpoint; history covers only the new epochs.
TrainResult resume_run(const TrainConfig& config, const Dataset& train, const Dataset& test, const ResumeFrom& from,
                       const TrainOptions& options = {});

std::uint64_t epoch_shuffle_seed(std::uint64_t seed, std::size_t epoch);
std::uint64_t batch_attack_seed(std::uint64_t seed, std::size_t epoch, std::size_t batch_index);
std::uint64_t eval_attack_seed(std::uint64_t seed);

}  // namespace edac
