#include "edac/train.hpp"

#include <chrono>
#include <cmath>

#include "edac/diagnostics.hpp"
#include "edac/error.hpp"
#include "edac/random.hpp"

namespace edac {

const char* method_name(Method m) noexcept {
  switch (m) {
    case Method::kAt: return "at";
    case Method::kEdac: return "edac";
    case Method::kEdacReg: return "edac_reg";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "at") return Method::kAt;
  if (name == "edac") return Method::kEdac;
  if (name == "edac_reg") return Method::kEdacReg;
  throw ConfigError("unknown method '" + name + "' (expected at, edac or edac_reg)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must lie in [0, 1)");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) throw ConfigError("train.lr_decay_factor must lie in (0, 1]");
  if (!(edac_eta >= 0.0) || !std::isfinite(edac_eta)) throw ConfigError("train.edac_eta must be >= 0");
  if (!(edac_reg_lambda >= 0.0) || !std::isfinite(edac_reg_lambda)) {
    throw ConfigError("train.edac_reg_lambda must be >= 0");
  }
  objective.validate();
  train_attack.validate();
  eval_attack.validate();
}

SgdResult sgd_step(const ParamVector& params, const ParamVector& grad, double lr, double momentum,
                   const ParamVector& momentum_buffer) {
  if (!params.same_layout(grad) || !params.same_layout(momentum_buffer)) {
    throw ShapeError("sgd_step: parameter, gradient and momentum layouts differ");
  }
  SgdResult out{params, momentum_buffer.scaled(momentum)};
  out.momentum.axpy(1.0, grad);
  out.params.axpy(-lr, out.momentum);
  return out;
}

double lr_at_epoch(const TrainConfig& config, std::size_t epoch) {
  double lr = config.lr;
  for (std::size_t d : config.lr_decay_epochs) {
    if (d <= epoch) lr *= config.lr_decay_factor;
  }
  return lr;
}

namespace {

AttackConfig seeded(const AttackConfig& base, std::uint64_t seed) {
  AttackConfig a = base;
  a.seed = seed;
  return a;
}

void require_finite(const ParamVector& p, const char* where) {
  if (!p.all_finite()) throw NumericError(std::string("non-finite parameters after ") + where);
}

StepResult apply_sgd(const ModelState& model, const ParamVector& grad, const TrainConfig& config,
                     const OptimizerState& opt, const StepContext& ctx) {
  if (!grad.all_finite()) throw NumericError("non-finite gradient in training step");
  SgdResult r = sgd_step(model.params, grad, ctx.lr, config.momentum, opt.momentum);
  require_finite(r.params, "SGD step");
  return StepResult{ModelState{model.spec, std::move(r.params)}, OptimizerState{std::move(r.momentum)}};
}

}  // namespace

StepResult at_update(const ModelState& model, const Batch& batch, const TrainConfig& config,
                     const OptimizerState& opt, const StepContext& ctx) {
  if (batch.size() == 0) throw ShapeError("at_update: empty batch");
  const AdversarialBatch adv = generate_batch(model, batch, seeded(config.train_attack, ctx.attack_seed));
  return apply_sgd(model, grad_robust_loss(model, adv, config.objective), config, opt, ctx);
}

EdacStepResult edac_update(const ModelState& model, const Batch& batch, const TrainConfig& config,
                           const OptimizerState& opt, const StepContext& ctx) {
  if (batch.size() == 0) throw ShapeError("edac_update: empty batch");
  if (!(config.edac_eta >= 0.0)) throw ConfigError("edac_eta must be >= 0");
  const AttackConfig attack_cfg = seeded(config.train_attack, ctx.attack_seed);

  HalfStepReport report;
  const AdversarialBatch frozen = generate_batch(model, batch, attack_cfg);
  report.ac_before = certainty_of(model, frozen.perturbed, frozen.labels).mean;

  ModelState half = model;
  double eta = config.edac_eta * ctx.eta_scale;
  if (eta > 0.0) {
    const ParamVector g_ac = grad_certainty_frozen(model, frozen.perturbed);
    if (!g_ac.all_finite()) throw NumericError("non-finite certainty gradient");
    half.params.axpy(-eta, g_ac);
    report.ac_half_frozen = certainty_of(half, frozen.perturbed, frozen.labels).mean;
    if (config.edac_backoff) {
      while (!(report.ac_half_frozen < report.ac_before) && report.halvings < 20) {
        eta *= 0.5;
        ++report.halvings;
        half = model;
        half.params.axpy(-eta, g_ac);
        report.ac_half_frozen = certainty_of(half, frozen.perturbed, frozen.labels).mean;
      }
    }
    require_finite(half.params, "extragradient half step");
  } else {
    report.ac_half_frozen = report.ac_before;
  }
  report.eta = eta;

  const AdversarialBatch adv = eta > 0.0 ? generate_batch(half, batch, attack_cfg) : frozen;
  report.ac_half = eta > 0.0 ? certainty_of(half, adv.perturbed, adv.labels).mean : report.ac_before;
  StepResult step = apply_sgd(half, grad_robust_loss(half, adv, config.objective), config, opt, ctx);
  return EdacStepResult{std::move(step.model), std::move(step.opt), report};
}

StepResult edac_reg_update(const ModelState& model, const Batch& batch, const TrainConfig& config,
                           const OptimizerState& opt, const StepContext& ctx) {
  if (batch.size() == 0) throw ShapeError("edac_reg_update: empty batch");
  if (config.edac_reg_lambda == 0.0) return at_update(model, batch, config, opt, ctx);
  const AdversarialBatch adv = generate_batch(model, batch, seeded(config.train_attack, ctx.attack_seed));
  const Tensor& clean = adv.originals;
  const double lambda = config.edac_reg_lambda;
  const Objective objective = config.objective;
  Loss loss = [&clean, lambda, objective](const GraphModel& m, Var inputs, std::span<const Label> labels) {
    Var robust = robust_loss_graph(m, m.graph().constant(clean), inputs, labels, objective);
    return robust + lambda * certainty_graph(m, inputs);
  };
  return apply_sgd(model, grad_params(loss, model, Batch{adv.perturbed, adv.labels}), config, opt, ctx);
}

std::uint64_t epoch_shuffle_seed(std::uint64_t seed, std::size_t epoch) {
  return derive_seed({seed, epoch, 0x73687566666c65ULL});
}

std::uint64_t batch_attack_seed(std::uint64_t seed, std::size_t epoch, std::size_t batch_index) {
  return derive_seed({seed, epoch, batch_index, 0x61747461636bULL});
}

std::uint64_t eval_attack_seed(std::uint64_t seed) { return derive_seed({seed, 0x6576616cULL}); }

void run_epoch(TrainState& state, const TrainConfig& config, const Dataset& train,
               std::vector<HalfStepReport>* half_steps) {
  const std::size_t epoch = state.epoch + 1;
  const double lr = lr_at_epoch(config, epoch);
  const auto order = batches(train.size(), config.batch_size, epoch_shuffle_seed(config.seed, epoch));
  for (std::size_t b = 0; b < order.size(); ++b) {
    const Batch batch = train.batch(order[b]);
    const double eta_scale = config.edac_eta_follows_lr ? lr / config.lr : 1.0;
    const StepContext ctx{lr, batch_attack_seed(config.seed, epoch, b), eta_scale};
    switch (config.method) {
      case Method::kAt: {
        StepResult r = at_update(state.model, batch, config, state.opt, ctx);
        state.model = std::move(r.model);
        state.opt = std::move(r.opt);
        break;
      }
      case Method::kEdac: {
        EdacStepResult r = edac_update(state.model, batch, config, state.opt, ctx);
        state.model = std::move(r.model);
        state.opt = std::move(r.opt);
        if (half_steps) half_steps->push_back(r.report);
        break;
      }
      case Method::kEdacReg: {
        StepResult r = edac_reg_update(state.model, batch, config, state.opt, ctx);
        state.model = std::move(r.model);
        state.opt = std::move(r.opt);
        break;
      }
    }
  }
  state.epoch = epoch;
}

namespace {

MetricsRecord measure(const TrainState& state, const TrainConfig& config, const Dataset& train,
                      const Dataset& test, double lr) {
  const AttackConfig attack = seeded(config.eval_attack, eval_attack_seed(config.seed));
  const EvalResult tr = evaluate(state.model, train, attack);
  const EvalResult te = evaluate(state.model, test, attack);
  MetricsRecord row;
  row.epoch = state.epoch;
  row.clean_acc_train = tr.clean_accuracy;
  row.clean_acc_test = te.clean_accuracy;
  row.robust_acc_train = tr.robust_accuracy;
  row.robust_acc_test = te.robust_accuracy;
  row.ac_train = tr.certainty.mean;
  row.ac_test = te.certainty.mean;
  row.lr = lr;
  row.method = config.method;
  return row;
}

Checkpoint snapshot(const TrainState& state, const TrainConfig& config, const MetricsRecord& row) {
  return Checkpoint{state.model, state.epoch, state.opt.momentum, RngRecord{config.seed, state.epoch + 1}, row};
}

TrainResult run_loop(const TrainConfig& config, const Dataset& train, const Dataset& test, TrainState state,
                     std::optional<Checkpoint> best, std::optional<Checkpoint> start, const TrainOptions& options) {
  config.validate();
  train.validate();
  test.validate();
  if (train.input_dim() != state.model.spec.input_dim || test.input_dim() != state.model.spec.input_dim) {
    throw ShapeError("dataset input_dim does not match the model");
  }
  TrainResult result;
  MetricsRecord initial_row;
  initial_row.method = config.method;
  Checkpoint last_done = start ? *start : snapshot(state, config, initial_row);
  const std::size_t stop = std::min(config.epochs, options.stop_after_epoch.value_or(config.epochs));
  while (state.epoch < stop) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t epoch = state.epoch + 1;
    MetricsRecord row;
    try {
      run_epoch(state, config, train);
      row = measure(state, config, train, test, lr_at_epoch(config, epoch));
    } catch (const NumericError& e) {
      throw TrainingAborted("epoch " + std::to_string(epoch) + ": " + e.what(), epoch, last_done);
    }
    row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    last_done = snapshot(state, config, row);
    if (!best || row.robust_acc_test > best->metrics.robust_acc_test) best = last_done;
    result.history.push_back(row);
    if (options.on_epoch) options.on_epoch(row);
  }
  result.final = last_done;
  result.best = best ? *best : last_done;
  return result;
}

}  // namespace

TrainResult train_run(const TrainConfig& config, const ModelSpec& spec, const Dataset& train, const Dataset& test,
                      const TrainOptions& options) {
  TrainState state{init_model(spec), OptimizerState::zeros(spec), 0};
  return run_loop(config, train, test, std::move(state), std::nullopt, std::nullopt, options);
}

TrainResult resume_run(const TrainConfig& config, const Dataset& train, const Dataset& test, const ResumeFrom& from,
                       const TrainOptions& options) {
  from.last.model.validate();
  if (from.last.rng.seed != config.seed) throw CheckpointError("checkpoint was written by a run with another seed");
  if (from.last.rng.next_epoch != from.last.epoch + 1) throw CheckpointError("checkpoint rng record is inconsistent");
  TrainState state{from.last.model, OptimizerState{from.last.optimizer_momentum}, from.last.epoch};
  std::optional<Checkpoint> best = from.best;
  if (!best && from.last.epoch > 0) best = from.last;
  return run_loop(config, train, test, std::move(state), best, from.last, options);
}

}  // namespace edac
