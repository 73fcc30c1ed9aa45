#include "deplen/optim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace deplen {
namespace {

double one_step(double theta, double grad, AdamConfig cfg) {
  Adam<double> adam(cfg);
  ParamSlot<double> slot{&theta, &grad, 1};
  adam.step(std::span(&slot, 1));
  return theta;
}

TEST(Adam, DefaultsMatchProtocol) {
  const AdamConfig cfg;
  EXPECT_EQ(cfg.lr, 1e-5);
  EXPECT_EQ(cfg.weight_decay, 1e-6);
  EXPECT_EQ(cfg.beta1, 0.9);
  EXPECT_EQ(cfg.beta2, 0.999);
  EXPECT_EQ(cfg.eps, 1e-8);
}

TEST(Adam, ScalarFirstStep) {
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  EXPECT_NEAR(one_step(1.0, 1.0, cfg), 0.9999900000001, 1e-10);
}

TEST(Adam, CoupledDecayActsAsGradient) {
  const double step = 1.0 - one_step(1.0, 0.0, AdamConfig{});
  EXPECT_NEAR(step, 9.900990099009903e-06, 1e-10);
  EXPECT_GT(step, 0.0);
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> mag(1e-4, 1e3);
  for (int i = 0; i < 200; ++i) {
    const double g = (i % 2 ? 1 : -1) * mag(rng);
    const double delta = one_step(0.3, g, cfg) - 0.3;
    EXPECT_NEAR(std::abs(delta), cfg.lr, 0.01 * cfg.lr) << g;
    EXPECT_LT(delta * g, 0.0);
  }
}

TEST(Adam, ConstantGradientKeepsStepNearLearningRate) {
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  Adam<double> adam(cfg);
  double theta = 0.0;
  const double g = 0.5;
  ParamSlot<double> slot{&theta, &g, 1};
  for (int t = 1; t <= 50; ++t) {
    const double before = theta;
    adam.step(std::span(&slot, 1));
    EXPECT_NEAR(before - theta, cfg.lr, 0.01 * cfg.lr);
  }
  EXPECT_EQ(adam.steps(), 50);
}

TEST(Adam, ZeroGradientZeroDecayIsAFixpoint) {
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  Adam<double> adam(cfg);
  std::vector<double> theta{0.0, 1.5, -2.0};
  const std::vector<double> grad(3, 0.0);
  ParamSlot<double> slot{theta.data(), grad.data(), 3};
  for (int i = 0; i < 100; ++i) adam.step(std::span(&slot, 1));
  EXPECT_EQ(theta, (std::vector<double>{0.0, 1.5, -2.0}));
  for (double m : adam.first_moments()[0]) EXPECT_EQ(m, 0.0);
  for (double v : adam.second_moments()[0]) EXPECT_EQ(v, 0.0);
}

TEST(Adam, MomentsFollowRecurrence) {
  AdamConfig cfg;
  cfg.weight_decay = 0.1;
  Adam<double> adam(cfg);
  double theta = 2.0, g = 0.5;
  ParamSlot<double> slot{&theta, &g, 1};
  adam.step(std::span(&slot, 1));
  const double g1 = 0.5 + 0.1 * 2.0;
  EXPECT_NEAR(adam.first_moments()[0][0], 0.1 * g1, 1e-15);
  EXPECT_NEAR(adam.second_moments()[0][0], 0.001 * g1 * g1, 1e-15);
}

TEST(Adam, NonFiniteGradientLeavesEverythingUntouched) {
  Adam<double> adam;
  std::vector<double> a{1.0, 2.0}, b{3.0};
  std::vector<double> ga{0.1, 0.2}, gb{0.3};
  std::vector<ParamSlot<double>> slots{{a.data(), ga.data(), 2}, {b.data(), gb.data(), 1}};
  adam.step(slots);
  const auto a1 = a, b1 = b;
  const auto m1 = adam.first_moments();
  for (double bad : {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity()}) {
    gb[0] = bad;
    EXPECT_THROW(adam.step(slots), NonFiniteGradient);
    EXPECT_EQ(a, a1);
    EXPECT_EQ(b, b1);
    EXPECT_EQ(adam.first_moments(), m1);
    EXPECT_EQ(adam.steps(), 1);
  }
}

TEST(Adam, IdenticalInputsGiveIdenticalUpdates) {
  std::vector<float> p1(64), p2(64), g(64);
  std::mt19937_64 rng(9);
  std::normal_distribution<float> n;
  for (int i = 0; i < 64; ++i) p1[i] = p2[i] = n(rng);
  Adam<float> a1, a2;
  for (int s = 0; s < 10; ++s) {
    for (auto& x : g) x = n(rng);
    ParamSlot<float> s1{p1.data(), g.data(), 64}, s2{p2.data(), g.data(), 64};
    a1.step(std::span(&s1, 1));
    a2.step(std::span(&s2, 1));
  }
  EXPECT_EQ(p1, p2);
}

TEST(Adam, RejectsChangedParameterSet) {
  Adam<double> adam;
  double x = 1.0, g = 1.0;
  ParamSlot<double> slot{&x, &g, 1};
  adam.step(std::span(&slot, 1));
  std::vector<ParamSlot<double>> two{slot, slot};
  EXPECT_THROW(adam.step(two), std::logic_error);
}

}  // namespace
}  // namespace deplen
