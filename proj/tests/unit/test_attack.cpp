#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "edac/attack.hpp"
#include "edac/error.hpp"
#include "edac/objective.hpp"
#include "helpers.hpp"

namespace edac {
namespace {

using testing::linf_pgd;
using testing::model_from;
using testing::random_labels;
using testing::random_matrix;

// Logits (-x, x): for label 0 the CE input-gradient is 2 * p1 > 0 everywhere.
ModelState rising_1d() { return model_from(ModelSpec{1, {2}, Activation::kRelu, 0}, {-1, 1, 0, 0}); }

TEST(ProjectBall, InsideBallIsUnchanged) {
  AttackConfig c = linf_pgd(0.5, 1, 0.1);
  const Tensor x = Tensor::vector({0.2, -0.3});
  EXPECT_TRUE(bitwise_equal(project_ball(x, Tensor::vector({0, 0}), c), x));
  c.norm = Norm::kL2;
  EXPECT_TRUE(bitwise_equal(project_ball(x, Tensor::vector({0, 0}), c), x));
}

TEST(ProjectBall, LinfClipsEachCoordinate) {
  const Tensor out = project_ball(Tensor::vector({0.3, -0.05}), Tensor::vector({0, 0}), linf_pgd(0.1, 1, 0.1));
  EXPECT_EQ(out[0], 0.1);
  EXPECT_EQ(out[1], -0.05);
}

TEST(ProjectBall, L2RescalesRadially) {
  AttackConfig c = linf_pgd(1.0, 1, 0.1);
  c.norm = Norm::kL2;
  const Tensor out = project_ball(Tensor::vector({3, 4}), Tensor::vector({0, 0}), c);
  EXPECT_NEAR(out[0], 0.6, 1e-15);
  EXPECT_NEAR(out[1], 0.8, 1e-15);
}

TEST(ProjectBall, AppliesDomainClampAfterProjection) {
  AttackConfig c = linf_pgd(0.5, 1, 0.1);
  c.domain_clamp = DomainBox{0.0, 1.0};
  const Tensor out = project_ball(Tensor::vector({1.4, -0.4}), Tensor::vector({0.95, 0.05}), c);
  EXPECT_EQ(out[0], 1.0);
  EXPECT_EQ(out[1], 0.0);
}

TEST(Fgsm, ZeroEpsilonReturnsInput) {
  const Tensor x = Tensor::vector({0.25});
  EXPECT_TRUE(bitwise_equal(fgsm(rising_1d(), x, std::vector<Label>{0}, linf_pgd(0.0, 1, 0.1)), x));
}

TEST(Fgsm, MovesAlongPositiveGradientByEpsilon) {
  const Tensor out = fgsm(rising_1d(), Tensor::vector({0.25}), std::vector<Label>{0}, linf_pgd(0.125, 1, 0.125));
  EXPECT_EQ(out[0], 0.375);
}

TEST(Fgsm, RejectsL2) {
  AttackConfig c = linf_pgd(0.1, 1, 0.1);
  c.kind = AttackKind::kFgsm;
  c.norm = Norm::kL2;
  EXPECT_THROW(fgsm(rising_1d(), Tensor::vector({0.0}), std::vector<Label>{0}, c), ConfigError);
}

TEST(Fgsm, EqualsSingleFullStepPgdBitwise) {
  Engine engine(3);
  for (int trial = 0; trial < 20; ++trial) {
    const ModelState m = init_model(ModelSpec{6, {9, 4}, Activation::kRelu, static_cast<std::uint64_t>(trial)});
    const Tensor x = random_matrix(5, 6, engine);
    const auto y = random_labels(5, 4, engine);
    const double eps = uniform(engine, 0.01, 0.5);
    AttackConfig c = linf_pgd(eps, 1, eps);
    EXPECT_TRUE(bitwise_equal(fgsm(m, x, y, c), pgd(m, x, y, c)));
  }
}

TEST(Pgd, ZeroStepsReturnsInput) {
  Engine engine(5);
  const ModelState m = init_model(ModelSpec{3, {4, 3}, Activation::kTanh, 1});
  const Tensor x = random_matrix(4, 3, engine);
  EXPECT_TRUE(bitwise_equal(pgd(m, x, random_labels(4, 3, engine), linf_pgd(0.3, 0, 0.1)), x));
}

TEST(Pgd, MonotoneLinearLossClosedForm) {
  for (std::size_t steps : {1u, 2u, 3u, 7u}) {
    const double alpha = 0.05;
    const double eps = 0.2;
    const Tensor out = pgd(rising_1d(), Tensor::vector({-0.3}), std::vector<Label>{0}, linf_pgd(eps, steps, alpha));
    EXPECT_NEAR(out[0], -0.3 + std::min(static_cast<double>(steps) * alpha, eps), 1e-12) << steps;
  }
}

TEST(Pgd, FeasibleForRandomConfigurations) {
  Engine engine(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + uniform_index(engine, 6);
    const std::size_t k = 2 + uniform_index(engine, 3);
    const ModelState m = init_model(ModelSpec{n, {5, k}, Activation::kRelu, engine()});
    AttackConfig c;
    c.norm = uniform01(engine) < 0.5 ? Norm::kLinf : Norm::kL2;
    c.epsilon = uniform(engine, 0.0, 1.0);
    c.steps = uniform_index(engine, 8);
    c.step_size = uniform(engine, 0.01, 0.6);
    c.random_start = uniform01(engine) < 0.5;
    c.seed = engine();
    if (uniform01(engine) < 0.5) c.domain_clamp = DomainBox{0.0, 1.0};
    Tensor x(Shape{3, n});
    for (double& v : x.storage()) v = uniform01(engine);
    const Tensor out = pgd(m, x, random_labels(3, k, engine), c);
    for (std::size_t r = 0; r < 3; ++r) {
      EXPECT_LE(perturbation_norm(out.row(r), x.row(r), c.norm), c.epsilon + 1e-9);
      if (c.domain_clamp) {
        for (double v : out.row(r)) {
          EXPECT_GE(v, 0.0);
          EXPECT_LE(v, 1.0);
        }
      }
    }
  }
}

TEST(Pgd, NonFiniteGradientIsANumericError) {
  const double big = std::numeric_limits<double>::max();
  const ModelState m = model_from(ModelSpec{1, {2}, Activation::kRelu, 0}, {big, -big, 0, 0});
  EXPECT_THROW(pgd(m, Tensor::vector({10.0}), std::vector<Label>{0}, linf_pgd(0.1, 2, 0.05)), NumericError);
}

TEST(GenerateBatch, ZeroEpsilonKeepsOriginals) {
  Engine engine(8);
  const ModelState m = init_model(ModelSpec{4, {5, 3}, Activation::kRelu, 2});
  const Batch b{random_matrix(6, 4, engine), random_labels(6, 3, engine)};
  AttackConfig c = linf_pgd(0.0, 5, 0.1);
  c.random_start = true;
  const AdversarialBatch adv = generate_batch(m, b, c);
  EXPECT_TRUE(bitwise_equal(adv.perturbed, adv.originals));
  EXPECT_EQ(adv.labels, b.labels);
}

TEST(GenerateBatch, SingleExampleMatchesPgd) {
  Engine engine(9);
  const ModelState m = init_model(ModelSpec{4, {5, 3}, Activation::kRelu, 2});
  const Tensor x = random_matrix(1, 4, engine);
  const std::vector<Label> y{2};
  const AttackConfig c = linf_pgd(0.3, 4, 0.1);
  EXPECT_TRUE(bitwise_equal(generate_batch(m, Batch{x, y}, c).perturbed, pgd(m, x, y, c)));
}

TEST(GenerateBatch, SeededRandomStartIsReproducible) {
  Engine engine(10);
  const ModelState m = init_model(ModelSpec{4, {5, 3}, Activation::kRelu, 2});
  const Batch b{random_matrix(6, 4, engine), random_labels(6, 3, engine)};
  AttackConfig c = linf_pgd(0.3, 4, 0.1);
  c.random_start = true;
  c.seed = 1234;
  const Tensor first = generate_batch(m, b, c).perturbed;
  EXPECT_TRUE(bitwise_equal(first, generate_batch(m, b, c).perturbed));
  c.seed = 1235;
  EXPECT_FALSE(bitwise_equal(first, generate_batch(m, b, c).perturbed));
}

TEST(GenerateBatch, RaisesLossOnLinearModels) {
  Engine engine(12);
  for (int trial = 0; trial < 20; ++trial) {
    const ModelState m = testing::linear_model(5, 3, engine());
    const Batch b{random_matrix(4, 5, engine), random_labels(4, 3, engine)};
    const AdversarialBatch adv = generate_batch(m, b, linf_pgd(0.2, 5, 0.05));
    const Tensor clean_logits = forward_logits(m, b.inputs);
    const Tensor adv_logits = forward_logits(m, adv.perturbed);
    for (std::size_t r = 0; r < 4; ++r) {
      EXPECT_GE(cross_entropy(adv_logits.row(r), b.labels[r]), cross_entropy(clean_logits.row(r), b.labels[r]));
    }
  }
}

TEST(AttackConfig, ValidationRejectsBadValues) {
  AttackConfig c = linf_pgd(-0.1, 1, 0.1);
  EXPECT_THROW(c.validate(), ConfigError);
  c = linf_pgd(0.1, 3, 0.0);
  EXPECT_THROW(c.validate(), ConfigError);
  c = linf_pgd(0.1, 0, 0.0);
  EXPECT_NO_THROW(c.validate());
}

}  // namespace
}  // namespace edac
