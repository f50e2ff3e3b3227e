#include "dagprobe/probe.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"

namespace dagprobe {
namespace {

using testing::numeric_gradient;
using testing::relative_error;

TEST(Softplus, StableAtExtremes) {
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-12);
  EXPECT_NEAR(softplus(-20.0), 2.0611536e-9, 1e-15);
  EXPECT_DOUBLE_EQ(softplus(800.0), 800.0);
  EXPECT_EQ(softplus(-800.0), 0.0);
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_TRUE(std::isfinite(sigmoid(-800.0)));
}

TEST(DepthScore, LinearNoBias) {
  const std::vector<double> e1{1, 0, 0}, z{3, -1, 7}, zero(3, 0.0);
  EXPECT_EQ(depth_score(e1, z), 3.0);
  EXPECT_EQ(depth_score(zero, z), 0.0);
  const std::vector<double> w{0.5, -2, 0.25}, z2{1.5, -3, 21};
  EXPECT_DOUBLE_EQ(depth_score(w, z2), 3.0 * depth_score(w, std::vector<double>{0.5, -1, 7}));
  EXPECT_THROW(depth_score(e1, std::vector<double>{1, 2}), ValidationError);
}

TEST(DepthScore, ScaleCovarianceKeepsOrderings) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const double c = rng.uniform(0.1, 10.0);
    auto w = testing::normal_vector(rng, 8);
    auto a = testing::normal_vector(rng, 8), b = testing::normal_vector(rng, 8);
    std::vector<double> ws = w, as = a, bs = b;
    for (double& x : ws) x /= c;
    for (double& x : as) x *= c;
    for (double& x : bs) x *= c;
    EXPECT_NEAR(depth_score(ws, as), depth_score(w, a), 1e-9);
    EXPECT_EQ(depth_score(ws, as) > depth_score(ws, bs), depth_score(w, a) > depth_score(w, b));
  }
}

TEST(RankingLoss, Examples) {
  EXPECT_NEAR(ranking_loss(1.3, 1.3), 0.693147, 1e-6);
  EXPECT_NEAR(ranking_loss(20.0, 0.0), 2.06e-9, 1e-11);
  EXPECT_DOUBLE_EQ(ranking_loss_grad(0.4, 0.4), -0.5);
}

TEST(RankingLoss, PositiveAndStrictlyDecreasingInTheMargin) {
  double prev = ranking_loss(-30.0, 0.0);
  for (double m = -29.5; m <= 30.0; m += 0.5) {
    const double l = ranking_loss(m, 0.0);
    EXPECT_GT(l, 0.0);
    EXPECT_LT(l, prev);
    prev = l;
  }
}

TEST(RegressionLoss, Examples) {
  EXPECT_EQ(regression_loss(2, 2), 0.0);
  EXPECT_EQ(regression_loss(0, 3), 9.0);
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const double p = rng.uniform(-5, 5), g = rng.uniform(0, 5), h = 1e-5;
    const double num = (regression_loss(p + h, g) - regression_loss(p - h, g)) / (2 * h);
    const double ana = regression_loss_grad(p, g);
    EXPECT_LE(std::abs(num - ana) / std::max(std::abs(ana), 1e-12), 1e-6);
  }
}

TEST(ClassificationLoss, Examples) {
  EXPECT_NEAR(classification_loss(std::vector<double>(6, 0.7), 2), std::log(6.0), 1e-12);
  EXPECT_NEAR(classification_loss(std::vector<double>{0, 0, 50, 0, 0, 0}, 2), 0.0, 1e-12);
  EXPECT_THROW(classification_loss(std::vector<double>(6, 0.0), 6), ValidationError);
  const auto g = classification_loss_grad(std::vector<double>(6, 0.0), 1);
  EXPECT_NEAR(g[1], 1.0 / 6.0 - 1.0, 1e-12);
  EXPECT_NEAR(g[0], 1.0 / 6.0, 1e-12);
}

TEST(ClassificationLoss, LogitGradientMatchesFiniteDifferences) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto logits = testing::normal_vector(rng, 6, 2.0);
    const std::size_t gold = rng.below(6);
    const auto num = numeric_gradient([&](std::span<const double> l) { return classification_loss(l, gold); }, logits);
    EXPECT_LE(relative_error(classification_loss_grad(logits, gold), num), 1e-6);
  }
}

TEST(DistanceLoss, ExamplesAndSymmetry) {
  const std::vector<double> z{1, 2, 3}, w{0.3, -1, 4};
  EXPECT_EQ(distance_loss(z, z, w, 0.0), 0.0);
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = testing::normal_vector(rng, 5), b = testing::normal_vector(rng, 5), v = testing::normal_vector(rng, 5);
    EXPECT_EQ(distance_prediction(v, a, b), distance_prediction(v, b, a));
    EXPECT_EQ(distance_loss(a, b, v, 2.0), distance_loss(b, a, v, 2.0));
  }
}

TEST(GradientCheck, AllFourObjectivesMatchCentralDifferences) {
  Rng rng(7);
  double worst[4] = {0, 0, 0, 0};
  for (int trial = 0; trial < 100; ++trial) {
    worst[0] = std::max(worst[0], testing::ranking_trial(rng));
    worst[1] = std::max(worst[1], testing::regression_trial(rng));
    worst[2] = std::max(worst[2], testing::classification_trial(rng));
    worst[3] = std::max(worst[3], testing::distance_trial(rng));
  }
  for (double e : worst) EXPECT_LE(e, 1e-4);
}

TEST(GradientCheck, ObjectivesAccumulateScaledGradients) {
  const std::vector<double> w{0.5, -0.25}, z{1.0, 2.0};
  std::vector<double> grad{10.0, 10.0};
  regression_objective(w, z, 3.0, grad, 0.5);
  // pred = 0, d/dw = 2 * (0 - 3) * z = (-6, -12), halved.
  EXPECT_DOUBLE_EQ(grad[0], 7.0);
  EXPECT_DOUBLE_EQ(grad[1], 4.0);
}

TEST(AdamW, FirstStepHandValue) {
  std::vector<double> p{1.0};
  AdamW opt(1, {0.1, 0.01, 0.9, 0.999, 1e-8});
  opt.step(p, std::vector<double>{0.5});
  // decay: 1 * (1 - 0.1 * 0.01) = 0.999; bias-corrected m/sqrt(v) = 1.
  EXPECT_NEAR(p[0], 0.899, 1e-6);
  opt.step(p, std::vector<double>{0.5});
  EXPECT_NEAR(p[0], 0.899 * 0.999 - 0.1, 1e-6);
  EXPECT_EQ(opt.steps(), 2u);
}

TEST(AdamW, DecayIsDecoupledFromTheMoments) {
  std::vector<double> p{2.0, -4.0};
  AdamW opt(2, {0.05, 0.1, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 3; ++i) opt.step(p, std::vector<double>{0.0, 0.0});
  EXPECT_NEAR(p[0], 2.0 * std::pow(1 - 0.005, 3), 1e-12);
  EXPECT_NEAR(p[1], -4.0 * std::pow(1 - 0.005, 3), 1e-12);
}

TEST(Predict, ClassifierTakesArgmaxAndDistancesAreSymmetric) {
  Probe cls;
  cls.variant = ProbeVariant::classification;
  cls.dim = 2;
  cls.weights = Matrix(kDepthClasses, 2);
  cls.weights(3, 0) = 1.0;
  cls.weights(5, 1) = 1.0;
  Matrix f(2, 2);
  f(0, 0) = 2.0;
  f(1, 1) = 2.0;
  EXPECT_EQ(predict_depths(cls, f), (std::vector<double>{3.0, 5.0}));

  Probe dist;
  dist.variant = ProbeVariant::distance;
  dist.dim = 2;
  dist.weights = Matrix(1, 2, 0.5);
  const Matrix d = predict_distances(dist, f);
  EXPECT_EQ(d(0, 0), 0.0);
  EXPECT_EQ(d(0, 1), d(1, 0));
  EXPECT_DOUBLE_EQ(d(0, 1), 2.0);
  EXPECT_THROW(predict_depths(dist, f), ValidationError);
  EXPECT_THROW(predict_distances(cls, f), ValidationError);
}

}  // namespace
}  // namespace dagprobe
