#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "edac/error.hpp"
#include "edac/gradcheck.hpp"
#include "edac/objective.hpp"
#include "helpers.hpp"

namespace edac {
namespace {

using testing::linf_pgd;
using testing::model_from;
using testing::random_labels;
using testing::random_matrix;

double mean_clean_ce(const ModelState& m, const Tensor& x, std::span<const Label> y) {
  const Tensor logits = forward_logits(m, x);
  double total = 0.0;
  for (std::size_t r = 0; r < y.size(); ++r) total += cross_entropy(logits.row(r), y[r]);
  return total / static_cast<double>(y.size());
}

// Straight-line population std, written independently of the library.
double std_of(std::span<const double> u) {
  double mu = 0.0;
  for (double v : u) mu += v;
  mu /= static_cast<double>(u.size());
  double ss = 0.0;
  for (double v : u) ss += (v - mu) * (v - mu);
  return std::sqrt(ss / static_cast<double>(u.size()));
}

TEST(VarFunctional, HandValues) {
  EXPECT_EQ(var_functional(std::vector<double>{1.7, 1.7, 1.7, 1.7}), 0.0);
  EXPECT_DOUBLE_EQ(var_functional(std::vector<double>{2, 0}), 1.0);
  EXPECT_NEAR(var_functional(std::vector<double>{1, 2, 3}), std::sqrt(2.0 / 3.0), 1e-15);
  EXPECT_THROW(var_functional(std::vector<double>{}), ShapeError);
}

TEST(VarFunctional, ShiftInvariantAndAbsolutelyHomogeneous) {
  Engine engine(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> u(2 + uniform_index(engine, 9));
    for (double& v : u) v = uniform(engine, -3, 3);
    const double c = uniform(engine, -5, 5);
    const double a = uniform(engine, -4, 4);
    std::vector<double> shifted = u;
    std::vector<double> scaled = u;
    for (double& v : shifted) v += c;
    for (double& v : scaled) v *= a;
    const double base = var_functional(u);
    EXPECT_NEAR(var_functional(shifted), base, 1e-12);
    EXPECT_NEAR(var_functional(scaled), std::abs(a) * base, 1e-12);
  }
}

TEST(CrossEntropy, HandValues) {
  EXPECT_NEAR(cross_entropy(std::vector<double>{0.3, 0.3}, 1), std::numbers::ln2, 1e-15);
  EXPECT_NEAR(cross_entropy(std::vector<double>{100, 0}, 0), 0.0, 1e-12);
  const double e1 = std::exp(1.0), e2 = std::exp(2.0), e3 = std::exp(3.0);
  EXPECT_NEAR(cross_entropy(std::vector<double>{1, 2, 3}, 2), -std::log(e3 / (e1 + e2 + e3)), 1e-14);
}

TEST(KlDivergence, HandTwoClassCase) {
  // softmax(0, 0) = (1/2, 1/2); softmax(ln 3, 0) = (3/4, 1/4).
  const double expected = 0.5 * std::log(0.5 / 0.75) + 0.5 * std::log(0.5 / 0.25);
  EXPECT_NEAR(kl_divergence(std::vector<double>{0, 0}, std::vector<double>{std::log(3.0), 0}), expected, 1e-15);
  EXPECT_EQ(kl_divergence(std::vector<double>{1, -2}, std::vector<double>{1, -2}), 0.0);
}

TEST(TradesLoss, HandTwoClassCase) {
  const ModelState identity = model_from(ModelSpec{2, {2}, Activation::kRelu, 0}, {1, 0, 0, 1, 0, 0});
  const Tensor clean = Tensor::matrix(1, 2, {0, 0});
  const Tensor adv = Tensor::matrix(1, 2, {std::log(3.0), 0});
  const double kl = 0.5 * std::log(0.5 / 0.75) + 0.5 * std::log(0.5 / 0.25);
  const std::vector<Label> y{0};
  EXPECT_NEAR(trades_loss(identity, clean, adv, y, 6.0), std::numbers::ln2 + 6.0 * kl, 1e-14);
}

TEST(TradesLoss, ReducesToCleanCe) {
  Engine engine(2);
  const ModelState m = init_model(ModelSpec{4, {6, 3}, Activation::kTanh, 3});
  const Tensor clean = random_matrix(5, 4, engine);
  const Tensor adv = random_matrix(5, 4, engine);
  const auto y = random_labels(5, 3, engine);
  EXPECT_NEAR(trades_loss(m, clean, clean, y, 6.0), mean_clean_ce(m, clean, y), 1e-12);
  EXPECT_NEAR(trades_loss(m, clean, adv, y, 0.0), mean_clean_ce(m, clean, y), 1e-12);
}

TEST(RobustLoss, ZeroEpsilonIsCleanCe) {
  Engine engine(3);
  const ModelState m = init_model(ModelSpec{4, {6, 3}, Activation::kRelu, 3});
  const Batch b{random_matrix(7, 4, engine), random_labels(7, 3, engine)};
  const AdversarialBatch adv = generate_batch(m, b, linf_pgd(0.0, 3, 0.1));
  EXPECT_NEAR(robust_loss(m, adv, Objective{}), mean_clean_ce(m, b.inputs, b.labels), 1e-12);
}

TEST(RobustLoss, SingleExampleIsItsCe) {
  Engine engine(4);
  const ModelState m = init_model(ModelSpec{4, {6, 3}, Activation::kRelu, 3});
  const Batch b{random_matrix(1, 4, engine), {1}};
  const AdversarialBatch adv = generate_batch(m, b, linf_pgd(0.2, 3, 0.1));
  const Tensor logits = forward_logits(m, adv.perturbed);
  EXPECT_NEAR(robust_loss(m, adv, Objective{}), cross_entropy(logits.row(0), 1), 1e-14);
}

TEST(RobustLoss, CeBoundsMisclassification) {
  Engine engine(5);
  const ModelState m = init_model(ModelSpec{4, {6, 3}, Activation::kRelu, 3});
  const Batch b{random_matrix(64, 4, engine, 2.0), random_labels(64, 3, engine)};
  const AdversarialBatch adv = generate_batch(m, b, linf_pgd(0.3, 5, 0.1));
  const Tensor logits = forward_logits(m, adv.perturbed);
  for (std::size_t r = 0; r < 64; ++r) {
    if (argmax(logits.row(r)) != b.labels[r]) {
      EXPECT_GE(cross_entropy(logits.row(r), b.labels[r]), std::numbers::ln2);
    }
  }
}

TEST(RobustLoss, TradesGraphMatchesScalarForm) {
  Engine engine(6);
  const ModelState m = init_model(ModelSpec{4, {6, 3}, Activation::kTanh, 3});
  const Batch b{random_matrix(5, 4, engine), random_labels(5, 3, engine)};
  const AdversarialBatch adv = generate_batch(m, b, linf_pgd(0.3, 3, 0.1));
  const Objective trades{ObjectiveKind::kTrades, 2.5};
  EXPECT_NEAR(robust_loss(m, adv, trades), trades_loss(m, adv.originals, adv.perturbed, b.labels, 2.5), 1e-12);
}

TEST(AdversarialCertainty, ConstantLogitsGiveZero) {
  Engine engine(7);
  ModelState m = init_model(ModelSpec{4, {6, 3}, Activation::kRelu, 3});
  for (double& w : m.params[2].storage()) w = 0.0;
  for (double& v : m.params[3].storage()) v = 0.75;
  const Batch b{random_matrix(8, 4, engine), random_labels(8, 3, engine)};
  const CertaintyReport r = adversarial_certainty(m, b, linf_pgd(0.3, 3, 0.1));
  EXPECT_EQ(r.mean, 0.0);
  for (double v : r.per_example) EXPECT_EQ(v, 0.0);
}

TEST(AdversarialCertainty, ZeroEpsilonIsCleanLogitSpread) {
  Engine engine(8);
  const ModelState m = init_model(ModelSpec{4, {6, 3}, Activation::kRelu, 3});
  const Batch b{random_matrix(8, 4, engine), random_labels(8, 3, engine)};
  const Tensor logits = forward_logits(m, b.inputs);
  double expected = 0.0;
  for (std::size_t r = 0; r < 8; ++r) expected += std_of(logits.row(r));
  expected /= 8.0;
  EXPECT_NEAR(adversarial_certainty(m, b, linf_pgd(0.0, 3, 0.1)).mean, expected, 1e-14);
}

TEST(AdversarialCertainty, MatchesBruteForceRecomputation) {
  Engine engine(9);
  const ModelState m = init_model(ModelSpec{5, {7, 4}, Activation::kRelu, 4});
  const Batch b{random_matrix(8, 5, engine), random_labels(8, 4, engine)};
  const AttackConfig attack = linf_pgd(0.25, 5, 0.07);
  const CertaintyReport report = adversarial_certainty(m, b, attack);

  std::vector<double> per_class_sum(4, 0.0);
  std::vector<std::size_t> per_class_count(4, 0);
  double total = 0.0;
  for (std::size_t r = 0; r < 8; ++r) {
    const Tensor x(Shape{1, 5}, std::vector<double>(b.inputs.row(r).begin(), b.inputs.row(r).end()));
    const std::vector<Label> y{b.labels[r]};
    const Tensor adv = pgd(m, x, y, attack);
    const double s = std_of(forward_logits(m, adv).row(0));
    EXPECT_NEAR(report.per_example[r], s, 1e-14);
    total += s;
    per_class_sum[y[0]] += s;
    per_class_count[y[0]] += 1;
  }
  EXPECT_NEAR(report.mean, total / 8.0, 1e-14);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(report.per_class_count[k], per_class_count[k]);
    const double expected = per_class_count[k] ? per_class_sum[k] / static_cast<double>(per_class_count[k]) : 0.0;
    EXPECT_NEAR(report.per_class_mean[k], expected, 1e-14);
  }
}

TEST(AdversarialCertainty, MeanIsAverageOfNonNegativeEntries) {
  Engine engine(10);
  for (int trial = 0; trial < 20; ++trial) {
    const ModelState m = init_model(ModelSpec{3, {5, 3}, Activation::kTanh, engine()});
    const Batch b{random_matrix(6, 3, engine), random_labels(6, 3, engine)};
    const CertaintyReport r = adversarial_certainty(m, b, linf_pgd(0.2, 2, 0.1));
    double total = 0.0;
    for (double v : r.per_example) {
      EXPECT_GE(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(r.mean, total / 6.0, 1e-12);
  }
}

TEST(GradCertainty, CommonOutputBiasDirectionIsFlat) {
  Engine engine(11);
  const ModelState m = init_model(ModelSpec{4, {6, 3}, Activation::kRelu, 5});
  const Batch b{random_matrix(8, 4, engine), random_labels(8, 3, engine)};
  const ParamVector g = grad_adversarial_certainty(m, b, linf_pgd(0.3, 3, 0.1));
  double along_shift = 0.0;
  for (double v : g[3].data()) along_shift += v;
  EXPECT_NEAR(along_shift, 0.0, 1e-12);
}

TEST(GradCertainty, FrozenInputsMatchFiniteDifferences) {
  Engine engine(12);
  const ModelState m = init_model(ModelSpec{4, {6, 3}, Activation::kTanh, 5});
  const Batch b{random_matrix(5, 4, engine), random_labels(5, 3, engine)};
  const AttackConfig attack = linf_pgd(0.3, 3, 0.1);
  const Tensor frozen = generate_batch(m, b, attack).perturbed;
  const auto analytic = grad_adversarial_certainty(m, b, attack).flatten();
  const auto numeric = finite_diff_grad(
      [&](std::span<const double> p) {
        const ModelState probe{m.spec, ParamVector::unflatten(m.params, p)};
        return certainty_of(probe, frozen, b.labels).mean;
      },
      m.params.flatten(), 1e-5);
  EXPECT_LT(relative_error(analytic, numeric), 1e-4);
}

TEST(GradCertainty, ZeroEpsilonEqualsCleanGradient) {
  Engine engine(13);
  const ModelState m = init_model(ModelSpec{4, {6, 3}, Activation::kTanh, 5});
  const Batch b{random_matrix(5, 4, engine), random_labels(5, 3, engine)};
  EXPECT_TRUE(bitwise_equal(grad_adversarial_certainty(m, b, linf_pgd(0.0, 3, 0.1)),
                            grad_certainty_frozen(m, b.inputs)));
}

}  // namespace
}  // namespace edac
