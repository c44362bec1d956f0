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

#include "ccomp/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "ccomp/errors.hpp"

namespace ccomp {

LossEvaluator::LossEvaluator(const WeightTensor& w, const GradientTensor& g)
    : w_(matricize(w)), g_(matricize(g)) {
  if (w.shape() != g.shape()) {
    throw DataError("gradient shape " + to_string(g.shape()) + " differs from weight shape " +
                    to_string(w.shape()));
  }
  g2_ = g_.array().square().matrix();
}

double LossEvaluator::operator()(const Matrix& approx) const {
  return ((approx - w_).array().square() * g2_.array()).sum();
}

double LossEvaluator::full_removal_loss() const {
  return (w_.array().square() * g2_.array()).sum();
}

double unit_information_loss(const ApproxState& state, const LossEvaluator& loss, const Unit& o) {
  return loss(state.removed(o));
}

double unit_information_loss(const ApproxState& state, const WeightTensor& w,
                             const GradientTensor& g, const Unit& o) {
  return unit_information_loss(state, LossEvaluator(w, g), o);
}

std::vector<CurvePoint> build_curve(const WeightTensor& w, const GradientTensor& g) {
  const LossEvaluator loss(w, g);
  const double normalizer = loss.full_removal_loss();
  if (!(normalizer > 0.0)) {
    throw NumericalError("sensitivity curve undefined: S[(G*W)^2] is zero");
  }

  ApproxState state(w);
  const std::vector<Unit> units = state.remaining_units();
  std::vector<double> scores(units.size());
  for (std::size_t u = 0; u < units.size(); ++u) scores[u] = loss(state.removed(units[u]));

  std::vector<std::size_t> order(units.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    // Singular values sort ahead of channels on equal score.
    return std::make_tuple(scores[x], units[x].is_channel(), units[x].index) <
           std::make_tuple(scores[y], units[y].is_channel(), units[y].index);
  });

  std::vector<bool> sv_removed(state.full_rank(), false);
  std::vector<CurvePoint> points;
  points.reserve(units.size());
  for (std::size_t idx : order) {
    Unit unit = units[idx];
    if (!unit.is_channel()) {
      const int original = unit.index;
      unit.index = static_cast<int>(
          std::count(sv_removed.begin(), sv_removed.begin() + original, false));
      sv_removed[original] = true;
    }
    state.remove(unit);
    points.push_back({state.compression_rate(), loss(state.matrix()) / normalizer, unit});
  }
  return points;
}

ExponentialFit fit_exponential(std::span<const double> rates, std::span<const double> losses) {
  if (rates.size() != losses.size()) throw DataError("rate and loss counts differ");
  std::vector<std::pair<double, double>> used;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (losses[i] > kFitLossFloor) used.emplace_back(rates[i], losses[i]);
  }
  if (used.size() < 3) {
    throw NumericalError("exponential fit needs at least 3 points with loss > 1e-12, got " +
                         std::to_string(used.size()));
  }
  // Canonical order makes the floating-point sums order independent.
  std::sort(used.begin(), used.end());

  const double count = static_cast<double>(used.size());
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (const auto& [x, i] : used) {
    mean_x += x;
    mean_y += std::log(i);
  }
  mean_x /= count;
  mean_y /= count;
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& [x, i] : used) {
    sxx += (x - mean_x) * (x - mean_x);
    sxy += (x - mean_x) * (std::log(i) - mean_y);
  }
  if (!(sxx > 0.0)) throw NumericalError("exponential fit degenerate: all rates are equal");

  ExponentialFit fit;
  fit.b = sxy / sxx;
  fit.a = std::exp(mean_y - fit.b * mean_x);

  double mean_i = 0.0;
  for (const auto& p : used) mean_i += p.second;
  mean_i /= count;
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (const auto& [x, i] : used) {
    const double r = i - fit.a * std::exp(fit.b * x);
    ss_res += r * r;
    ss_tot += (i - mean_i) * (i - mean_i);
  }
  if (ss_tot > 0.0) {
    fit.r_squared = 1.0 - ss_res / ss_tot;
  } else {
    // Constant data: perfect if the model reproduces it.
    fit.r_squared = ss_res <= 1e-24 * count ? 1.0 : 0.0;
  }
  return fit;
}

ExponentialFit fit_exponential(std::span<const CurvePoint> points) {
  std::vector<double> rates;
  std::vector<double> losses;
  rates.reserve(points.size());
  losses.reserve(points.size());
  for (const auto& p : points) {
    rates.push_back(p.rate);
    losses.push_back(p.loss);
  }
  return fit_exponential(rates, losses);
}

SensitivityCurve analyze_layer(const WeightTensor& w, const GradientTensor& g) {
  SensitivityCurve curve;
  curve.points = build_curve(w, g);
  curve.fit = fit_exponential(curve.points);
  return curve;
}

}  // namespace ccomp
