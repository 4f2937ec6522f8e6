#include <gtest/gtest.h>

#include <cmath>

#include "edac/error.hpp"
#include "edac/gradcheck.hpp"
#include "edac/graph.hpp"
#include "edac/model.hpp"
#include "helpers.hpp"

namespace edac {
namespace {

using testing::model_from;
using testing::random_labels;
using testing::random_matrix;

TEST(InitModel, SameSeedGivesIdenticalParameters) {
  const ModelSpec spec{2, {4, 2}, Activation::kRelu, 7};
  EXPECT_TRUE(bitwise_equal(init_model(spec).params, init_model(spec).params));
}

TEST(InitModel, DifferentSeedChangesParameters) {
  ModelSpec a{2, {4, 2}, Activation::kRelu, 7};
  ModelSpec b = a;
  b.init_seed = 8;
  EXPECT_FALSE(bitwise_equal(init_model(a).params, init_model(b).params));
}

TEST(InitModel, WeightsRespectFanInBound) {
  const ModelSpec spec{2, {4, 2}, Activation::kRelu, 7};
  const ModelState m = init_model(spec);
  // First layer has fan-in 2, second fan-in 4.
  const double bound0 = 1.0 / std::sqrt(2.0);
  const double bound1 = 1.0 / std::sqrt(4.0);
  EXPECT_DOUBLE_EQ(init_bound(2), bound0);
  for (std::size_t s = 0; s < 2; ++s) {
    for (double w : m.params[s].data()) EXPECT_LE(std::abs(w), bound0);
  }
  for (std::size_t s = 2; s < 4; ++s) {
    for (double w : m.params[s].data()) EXPECT_LE(std::abs(w), bound1);
  }
}

TEST(ModelSpec, ZeroWidthIsAConfigError) {
  EXPECT_THROW(init_model(ModelSpec{2, {0, 2}, Activation::kRelu, 1}), ConfigError);
  EXPECT_THROW(init_model(ModelSpec{2, {4, 1}, Activation::kRelu, 1}), ConfigError);
  EXPECT_THROW(init_model(ModelSpec{0, {2}, Activation::kRelu, 1}), ConfigError);
}

TEST(ParamVector, FlattenRoundTrip) {
  const ModelState m = init_model(ModelSpec{3, {5, 4}, Activation::kTanh, 2});
  const auto flat = m.params.flatten();
  EXPECT_EQ(flat.size(), 3u * 5 + 5 + 5 * 4 + 4);
  EXPECT_TRUE(bitwise_equal(ParamVector::unflatten(m.params, flat), m.params));
  EXPECT_EQ(m.params.segments()[0].name, "w0");
  EXPECT_EQ(m.params.segments()[3].name, "b1");
}

TEST(ForwardLogits, ZeroModelGivesZeroLogits) {
  const ModelSpec spec{3, {4, 3}, Activation::kRelu, 0};
  const ModelState m{spec, ParamVector::zeros(spec)};
  const Tensor out = forward_logits(m, Tensor::vector({1.5, -2.0, 7.0}));
  ASSERT_EQ(out.size(), 3u);
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(ForwardLogits, IdentityLayer) {
  const ModelState m = model_from(ModelSpec{2, {2}, Activation::kRelu, 0}, {1, 0, 0, 1, 0, 0});
  const Tensor out = forward_logits(m, Tensor::vector({1, 2}));
  EXPECT_EQ(out[0], 1.0);
  EXPECT_EQ(out[1], 2.0);
}

// w0 = [[1, -1], [2, 0.5]], b0 = [0, -1], w1 = [[1, 1], [-1, 2]], b1 = [0.5, 0].
// x = (1, 3): hidden pre-activation (-2, 2.5) -> relu (0, 2.5) -> logits (3, 5).
ModelState hand_two_layer() {
  return model_from(ModelSpec{2, {2, 2}, Activation::kRelu, 0}, {1, -1, 2, 0.5, 0, -1, 1, 1, -1, 2, 0.5, 0});
}

TEST(ForwardLogits, HandEvaluatedTwoLayerRelu) {
  const Tensor out = forward_logits(hand_two_layer(), Tensor::vector({1, 3}));
  EXPECT_DOUBLE_EQ(out[0], 3.0);
  EXPECT_DOUBLE_EQ(out[1], 5.0);
  EXPECT_EQ(predict_label(hand_two_layer(), Tensor::vector({1, 3})), 1u);
}

TEST(ForwardLogits, ShapeMismatchThrows) {
  EXPECT_THROW(forward_logits(hand_two_layer(), Tensor::vector({1, 2, 3})), ShapeError);
}

TEST(ForwardLogits, BatchRowsMatchSingleRowsBitwise) {
  Engine engine(4);
  const ModelState m = init_model(ModelSpec{7, {13, 5}, Activation::kTanh, 3});
  const Tensor x = random_matrix(9, 7, engine);
  const Tensor batch = forward_logits(m, x);
  for (std::size_t r = 0; r < 9; ++r) {
    const Tensor row(Shape{7}, std::vector<double>(x.row(r).begin(), x.row(r).end()));
    const Tensor single = forward_logits(m, row);
    for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(single[k], batch.at(r, k));
  }
  EXPECT_TRUE(bitwise_equal(batch, forward_logits(m, x)));
}

TEST(ForwardLogits, LinearModelWithoutBiasIsHomogeneous) {
  Engine engine(11);
  ModelState m = init_model(ModelSpec{4, {3}, Activation::kRelu, 5});
  for (double& b : m.params[1].storage()) b = 0.0;
  const Tensor x = random_matrix(1, 4, engine);
  Tensor ax = x;
  for (double& v : ax.storage()) v *= -2.5;
  const Tensor fx = forward_logits(m, x);
  const Tensor fax = forward_logits(m, ax);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(fax[k], -2.5 * fx[k], 1e-12);
}

TEST(PredictLabel, TiesGoToLowestIndex) {
  EXPECT_EQ(argmax(std::vector<double>{0.1, 0.9}), 1u);
  EXPECT_EQ(argmax(std::vector<double>{0.5, 0.5}), 0u);
  EXPECT_EQ(argmax(std::vector<double>{-1.0, 2.0, 2.0}), 1u);
}

TEST(PredictLabel, InvariantToCommonLogitShift) {
  Engine engine(21);
  ModelState m = init_model(ModelSpec{5, {6, 4}, Activation::kRelu, 8});
  const Tensor x = random_matrix(30, 5, engine, 2.0);
  const auto before = predict_labels(m, x);
  for (double& b : m.params[3].storage()) b += 3.25;
  EXPECT_EQ(predict_labels(m, x), before);
}

TEST(Graph, SquareThroughSharedOperandGivesTwiceTheta) {
  Graph g;
  const Var theta = g.leaf(Tensor(Shape{1, 1}, std::vector<double>{3.0}));
  const Var zero = g.constant(Tensor(Shape{1}, std::vector<double>{0.0}));
  const Var sq = sum(affine(theta, theta, zero));
  EXPECT_DOUBLE_EQ(sq.value().item(), 9.0);
  g.backward(sq);
  EXPECT_DOUBLE_EQ(g.grad(theta)[0], 6.0);
}

TEST(Graph, SignHasNoGradientRule) {
  Graph g;
  const Var x = g.leaf(Tensor::vector({1.0, -2.0}));
  const Var s = sum(sign(x));
  EXPECT_DOUBLE_EQ(s.value().item(), 0.0);
  EXPECT_THROW(g.backward(s), CapabilityError);
}

TEST(Graph, RowStdAtConstantRowHasZeroSubgradient) {
  Graph g;
  const Var x = g.leaf(Tensor(Shape{1, 3}, std::vector<double>{2.0, 2.0, 2.0}));
  const Var s = sum(row_std(x));
  g.backward(s);
  const Tensor dx = g.grad(x);
  for (double v : dx.data()) EXPECT_EQ(v, 0.0);
}

TEST(GradParams, ConstantLossGivesZero) {
  const ModelState m = hand_two_layer();
  const Loss constant = [](const GraphModel& gm, Var, std::span<const Label>) {
    return gm.graph().constant(Tensor::scalar(4.0));
  };
  const Batch batch{Tensor::matrix(1, 2, {1, 3}), {0}};
  const ParamVector g = grad_params(constant, m, batch);
  EXPECT_EQ(g.max_abs(), 0.0);
  EXPECT_TRUE(g.same_layout(m.params));
}

TEST(GradParams, MatchesFiniteDifferencesOnSmoothMlp) {
  Engine engine(31);
  const ModelState m = init_model(ModelSpec{4, {6, 5, 3}, Activation::kTanh, 12});
  const Batch batch{random_matrix(5, 4, engine), random_labels(5, 3, engine)};
  const Loss loss = mean_cross_entropy_loss();
  const auto analytic = grad_params(loss, m, batch).flatten();
  const auto numeric = finite_diff_grad(
      [&](std::span<const double> p) {
        const ModelState probe{m.spec, ParamVector::unflatten(m.params, p)};
        return loss_value(loss, probe, batch);
      },
      m.params.flatten(), 1e-5);
  EXPECT_LT(relative_error(analytic, numeric), 1e-6);
}

TEST(GradInput, LossIndependentOfInputGivesZero) {
  const ModelState m = hand_two_layer();
  const Loss bias_only = [](const GraphModel& gm, Var, std::span<const Label>) { return sum(gm.params()[1]); };
  const Tensor g = grad_input(bias_only, m, Tensor::matrix(2, 2, {1, 3, -1, 0.5}), std::vector<Label>{0, 1});
  EXPECT_EQ(g.shape(), (Shape{2, 2}));
  for (double v : g.data()) EXPECT_EQ(v, 0.0);
}

TEST(GradInput, LinearCrossEntropyHandCase) {
  // logits z = W x with W = [[1, 2], [0, -1]], x = (0.5, 1), label 0.
  // dCE/dx = W^T (softmax(z) - e_0).
  const ModelState m = model_from(ModelSpec{2, {2}, Activation::kRelu, 0}, {1, 2, 0, -1, 0, 0});
  const double z0 = 2.5;
  const double z1 = -1.0;
  const double p0 = std::exp(z0) / (std::exp(z0) + std::exp(z1));
  const double p1 = 1.0 - p0;
  const double expected0 = 1.0 * (p0 - 1.0) + 0.0 * p1;
  const double expected1 = 2.0 * (p0 - 1.0) - 1.0 * p1;
  const Tensor g = grad_input(mean_cross_entropy_loss(), m, Tensor::vector({0.5, 1.0}), std::vector<Label>{0});
  ASSERT_EQ(g.shape(), (Shape{2}));
  EXPECT_NEAR(g[0], expected0, 1e-14);
  EXPECT_NEAR(g[1], expected1, 1e-14);
}

TEST(GradInput, MatchesFiniteDifferencesOnSmoothMlp) {
  Engine engine(41);
  const ModelState m = init_model(ModelSpec{6, {7, 4}, Activation::kTanh, 13});
  const Tensor x = random_matrix(3, 6, engine);
  const auto labels = random_labels(3, 4, engine);
  const Loss loss = mean_cross_entropy_loss();
  const Tensor analytic = grad_input(loss, m, x, labels);
  const auto numeric = finite_diff_grad(
      [&](std::span<const double> p) {
        const Tensor probe(x.shape(), std::vector<double>(p.begin(), p.end()));
        return loss_value(loss, m, Batch{probe, labels});
      },
      x.data(), 1e-5);
  EXPECT_LT(relative_error(analytic.data(), numeric), 1e-6);
}

TEST(FiniteDiff, SquareAtThree) {
  const auto g = finite_diff_grad([](std::span<const double> p) { return p[0] * p[0]; }, std::vector<double>{3.0}, 1e-5);
  EXPECT_NEAR(g[0], 6.0, 1e-6);
}

TEST(FiniteDiff, ConstantGivesZero) {
  const auto g = finite_diff_grad([](std::span<const double>) { return 2.0; }, std::vector<double>{1.0, -4.0}, 1e-5);
  EXPECT_EQ(g, (std::vector<double>{0.0, 0.0}));
}

}  // namespace
}  // namespace edac
