// Copyright 2026 The ccomp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ccomp/errors.hpp"
#include "ccomp/sensitivity.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace ccomp {
namespace {

GradientTensor ones(const Shape& s) {
  GradientTensor g(s);
  for (double& v : g.values()) v = 1.0;
  return g;
}

TEST(UnitLoss, ZeroGradientGivesZero) {
  std::mt19937_64 rng(1);
  const Shape s{3, 4, 2};
  const WeightTensor w = testing::random_weight(s, rng);
  const ApproxState st(w);
  for (const Unit& u : st.remaining_units()) {
    EXPECT_EQ(unit_information_loss(st, w, GradientTensor(s), u), 0.0) << to_string(u);
  }
}

TEST(UnitLoss, PruningZeroChannelIsFree) {
  std::mt19937_64 rng(2);
  const Shape s{3, 3, 2};
  WeightTensor w = testing::random_weight(s, rng);
  for (int o = 0; o < 3; ++o)
    for (int q = 0; q < 4; ++q) w.values()[o * 12 + 4 + q] = 0.0;
  EXPECT_EQ(unit_information_loss(ApproxState(w), w, testing::random_gradient(s, rng),
                                  Unit::channel(1)),
            0.0);
}

TEST(UnitLoss, MatchesHandLoop) {
  std::mt19937_64 rng(3);
  const Shape s{3, 2, 1};
  const WeightTensor w = testing::random_weight(s, rng);
  const GradientTensor g = testing::random_gradient(s, rng);
  const ApproxState st(w);
  for (const Unit& u : st.remaining_units()) {
    const WeightTensor after = dematricize(st.removed(u), s);
    EXPECT_NEAR(unit_information_loss(st, w, g, u), oracle::loss(after, w, g), 1e-12);
  }
  // Channel 0 by hand: sum over o of (g[o,0] * w[o,0])^2.
  double hand = 0.0;
  for (int o = 0; o < 3; ++o) hand += std::pow(g(o, 0, 0, 0) * w(o, 0, 0, 0), 2);
  EXPECT_NEAR(unit_information_loss(st, w, g, Unit::channel(0)), hand, 1e-12);
}

TEST(UnitLoss, FullRemovalLoss) {
  std::mt19937_64 rng(4);
  const Shape s{2, 3, 3};
  const WeightTensor w = testing::random_weight(s, rng);
  const GradientTensor g = testing::random_gradient(s, rng);
  EXPECT_NEAR(LossEvaluator(w, g).full_removal_loss(), oracle::loss(WeightTensor(s), w, g), 1e-12);
}

TEST(BuildCurve, CountAndEndpoint) {
  std::mt19937_64 rng(5);
  const Shape s{4, 4, 3};
  const auto points = build_curve(testing::random_weight(s, rng), testing::random_gradient(s, rng));
  ASSERT_EQ(points.size(), static_cast<std::size_t>(s.c + s.full_rank()));
  EXPECT_NEAR(points.back().rate, 1.0, 1e-12);
  EXPECT_NEAR(points.back().loss, 1.0, 1e-9);
}

TEST(BuildCurve, ReplayMatchesFromScratchLoss) {
  std::mt19937_64 rng(6);
  const Shape s{4, 4, 3};
  const WeightTensor w = testing::random_weight(s, rng);
  const GradientTensor g = testing::random_gradient(s, rng);
  const auto points = build_curve(w, g);
  const double norm = oracle::loss(WeightTensor(s), w, g);
  ApproxState st(w);
  for (const CurvePoint& p : points) {
    st.remove(p.removed);
    EXPECT_NEAR(p.loss, oracle::loss(st.approx(), w, g) / norm, 1e-9);
    EXPECT_NEAR(p.rate, st.compression_rate(), 1e-12);
  }
}

TEST(BuildCurve, SingleNonzeroChannel) {
  // Only channel 2 carries weight; the rank is 1. The three empty channels
  // and two null singular values cost nothing and come first.
  const Shape s{3, 4, 1};
  WeightTensor w(s);
  w(0, 2, 0, 0) = 1.0;
  w(1, 2, 0, 0) = -2.0;
  w(2, 2, 0, 0) = 0.5;
  const auto points = build_curve(w, ones(s));
  ASSERT_EQ(points.size(), 7u);
  int channels = 0;
  for (int i = 0; i < 5; ++i) {
    EXPECT_LT(points[i].loss, 1e-20) << i;
    channels += points[i].removed.is_channel() ? 1 : 0;
    EXPECT_NE(points[i].removed, Unit::channel(2));
  }
  EXPECT_EQ(channels, 3);
  EXPECT_NEAR(points[5].loss, 1.0, 1e-12);
  EXPECT_NEAR(points[6].loss, 1.0, 1e-12);
  EXPECT_EQ(points[6].rate, 1.0);
}

TEST(BuildCurve, ZeroNormalizerThrows) {
  const Shape s{2, 2, 1};
  EXPECT_THROW(build_curve(WeightTensor(s), ones(s)), NumericalError);
}

TEST(FitExponential, ExactModel) {
  std::vector<double> rates, losses;
  for (int i = 0; i <= 10; ++i) {
    rates.push_back(i / 10.0);
    losses.push_back(0.5 * std::exp(2.0 * rates.back()));
  }
  const ExponentialFit fit = fit_exponential(rates, losses);
  EXPECT_NEAR(fit.a, 0.5, 1e-12);
  EXPECT_NEAR(fit.b, 2.0, 1e-12);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
}

TEST(FitExponential, ConstantLossGivesFlatModel) {
  const std::vector<double> rates{0.0, 0.25, 0.5, 0.75, 1.0};
  const std::vector<double> losses(5, 1.0);
  const ExponentialFit fit = fit_exponential(rates, losses);
  EXPECT_NEAR(fit.b, 0.0, 1e-12);
  EXPECT_NEAR(fit.a, 1.0, 1e-12);
}

TEST(FitExponential, RecoversRateUnderNoise) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 0.005);
  std::uniform_real_distribution<double> ua(0.001, 0.1), ub(1.0, 10.0);
  std::vector<double> errors;
  for (int trial = 0; trial < 100; ++trial) {
    const double a = ua(rng);
    const double b = ub(rng);
    std::vector<double> rates, losses;
    for (int i = 0; i < 100; ++i) {
      const double r = i / 99.0;
      rates.push_back(r);
      losses.push_back(std::max(a * std::exp(b * r) * (1.0 + noise(rng)), 1e-6));
    }
    errors.push_back(std::abs(fit_exponential(rates, losses).b - b) / b);
  }
  std::nth_element(errors.begin(), errors.begin() + 50, errors.end());
  EXPECT_LE(errors[50], 0.10);
}

TEST(FitExponential, OrderInvariant) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> rates, losses;
  for (int i = 0; i < 30; ++i) {
    rates.push_back(u(rng));
    losses.push_back(0.02 * std::exp(4.0 * rates.back()) + 0.01 * u(rng));
  }
  const ExponentialFit first = fit_exponential(rates, losses);
  std::vector<std::size_t> perm(rates.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> r2, l2;
  for (std::size_t i : perm) {
    r2.push_back(rates[i]);
    l2.push_back(losses[i]);
  }
  const ExponentialFit second = fit_exponential(r2, l2);
  EXPECT_EQ(first.a, second.a);
  EXPECT_EQ(first.b, second.b);
  EXPECT_EQ(first.r_squared, second.r_squared);
}

TEST(FitExponential, DropsZeroLossPoints) {
  const std::vector<double> rates{0.0, 0.1, 0.5, 0.75, 1.0};
  const std::vector<double> losses{0.0, 1e-13, std::exp(0.5), std::exp(0.75), std::exp(1.0)};
  const ExponentialFit fit = fit_exponential(rates, losses);
  EXPECT_NEAR(fit.b, 1.0, 1e-12);
  EXPECT_NEAR(fit.a, 1.0, 1e-12);
}

TEST(FitExponential, Errors) {
  const std::vector<double> two_r{0.1, 0.2, 0.3};
  const std::vector<double> two_l{0.0, 0.5, 0.6};
  EXPECT_THROW(fit_exponential(two_r, two_l), NumericalError);
  const std::vector<double> same_r{0.5, 0.5, 0.5};
  const std::vector<double> any_l{0.1, 0.2, 0.3};
  EXPECT_THROW(fit_exponential(same_r, any_l), NumericalError);
}

TEST(AnalyzeLayer, FitsItsOwnCurve) {
  std::mt19937_64 rng(9);
  const Shape s{6, 5, 3};
  const WeightTensor w = testing::random_weight(s, rng);
  const GradientTensor g = testing::random_gradient(s, rng);
  const SensitivityCurve curve = analyze_layer(w, g);
  const ExponentialFit refit = fit_exponential(curve.points);
  EXPECT_EQ(curve.fit.a, refit.a);
  EXPECT_EQ(curve.fit.b, refit.b);
  EXPECT_GT(curve.fit.b, 0.0);
}

}  // namespace
}  // namespace ccomp
