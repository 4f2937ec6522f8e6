#include <benchmark/benchmark.h>

#include "edac/attack.hpp"
#include "edac/data.hpp"
#include "edac/objective.hpp"
#include "edac/train.hpp"

namespace {

using namespace edac;

// Default benchmark shapes: 16 inputs, two hidden layers of 128, 4 classes.
struct Fixture {
  Dataset data = make_gaussian_mixture(GaussianMixtureSpec{4, 16, 64, 3.0, 1.5, 7});
  ModelState model = init_model(ModelSpec{16, {128, 128, 4}, Activation::kRelu, 1});

  Batch batch(std::size_t size) const {
    std::vector<std::size_t> idx(size);
    for (std::size_t i = 0; i < size; ++i) idx[i] = i % data.size();
    return data.batch(idx);
  }
};

AttackConfig pgd10() {
  AttackConfig a;
  a.epsilon = 0.4;
  a.step_size = 0.1;
  a.steps = 10;
  return a;
}

void BM_Forward(benchmark::State& state) {
  const Fixture f;
  const Batch b = f.batch(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(forward_logits(f.model, b.inputs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(128);

void BM_GradParams(benchmark::State& state) {
  const Fixture f;
  const Batch b = f.batch(static_cast<std::size_t>(state.range(0)));
  const Loss loss = mean_cross_entropy_loss();
  for (auto _ : state) benchmark::DoNotOptimize(grad_params(loss, f.model, b));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GradParams)->Arg(1)->Arg(128);

void BM_Pgd10(benchmark::State& state) {
  const Fixture f;
  const Batch b = f.batch(128);
  const AttackConfig a = pgd10();
  for (auto _ : state) benchmark::DoNotOptimize(pgd(f.model, b.inputs, b.labels, a));
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_Pgd10);

void BM_GradCertainty(benchmark::State& state) {
  const Fixture f;
  const Batch b = f.batch(128);
  for (auto _ : state) benchmark::DoNotOptimize(grad_certainty_frozen(f.model, b.inputs));
}
BENCHMARK(BM_GradCertainty);

TrainConfig step_config(Method method) {
  TrainConfig c;
  c.method = method;
  c.edac_eta = 0.3;
  c.train_attack = pgd10();
  c.eval_attack = c.train_attack;
  return c;
}

void BM_AtUpdate(benchmark::State& state) {
  const Fixture f;
  const Batch b = f.batch(128);
  const TrainConfig c = step_config(Method::kAt);
  const OptimizerState opt = OptimizerState::zeros(f.model.spec);
  for (auto _ : state) benchmark::DoNotOptimize(at_update(f.model, b, c, opt, StepContext{0.1, 1, 1.0}));
}
BENCHMARK(BM_AtUpdate);

void BM_EdacUpdate(benchmark::State& state) {
  const Fixture f;
  const Batch b = f.batch(128);
  const TrainConfig c = step_config(Method::kEdac);
  const OptimizerState opt = OptimizerState::zeros(f.model.spec);
  for (auto _ : state) benchmark::DoNotOptimize(edac_update(f.model, b, c, opt, StepContext{0.1, 1, 1.0}));
}
BENCHMARK(BM_EdacUpdate);

}  // namespace

BENCHMARK_MAIN();
