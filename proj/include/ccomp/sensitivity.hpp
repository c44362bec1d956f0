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

#pragma once

#include <span>
#include <vector>

#include "ccomp/compression.hpp"
#include "ccomp/tensor.hpp"

namespace ccomp {

/// First-order Taylor estimate of the loss change caused by replacing a
/// layer's weight W with an approximation: S[(G * (W_bar - W))^2], with G
/// the dataset-averaged gradient. Holds W and G in matricized form so the
/// same layer can be scored many times.
class LossEvaluator {
 public:
  LossEvaluator(const WeightTensor& w, const GradientTensor& g);

  const Matrix& weight() const { return w_; }
  const Matrix& gradient() const { return g_; }
  /// Elementwise G^2.
  const Matrix& gradient_squared() const { return g2_; }

  double operator()(const Matrix& approx) const;
  /// Loss of removing everything, S[(G * W)^2].
  double full_removal_loss() const;

 private:
  Matrix w_;
  Matrix g_;
  Matrix g2_;
};

/// Un-normalized information loss of removing unit `o` from `state`.
double unit_information_loss(const ApproxState& state, const LossEvaluator& loss, const Unit& o);
double unit_information_loss(const ApproxState& state, const WeightTensor& w,
                             const GradientTensor& g, const Unit& o);

struct CurvePoint {
  double rate = 0.0;  // compression rate after this removal
  double loss = 0.0;  // loss normalized by the full-removal loss
  Unit removed;       // unit removed at this step, indexed against the state before removal
};

struct ExponentialFit {
  double a = 0.0;
  double b = 0.0;
  double r_squared = 0.0;
};

struct SensitivityCurve {
  std::vector<CurvePoint> points;
  ExponentialFit fit;
};

/// Points with loss at or below this are left out of the exponential fit.
inline constexpr double kFitLossFloor = 1e-12;

/// Greedy sensitivity sweep. Every unit of the original layer is scored
/// once by its single-removal loss; units are then removed cumulatively in
/// ascending score order (ties: singular values before channels, then
/// lower index) and (rate, normalized loss) is recorded after each removal.
/// Returns c + r points; the last one is (1, 1).
///
/// Singular values are tracked by rank: the j-th original position maps to
/// the j-th largest singular value still retained, even after a channel
/// prune has recomputed the decomposition.
std::vector<CurvePoint> build_curve(const WeightTensor& w, const GradientTensor& g);

/// Log-linear least squares fit of loss = a * exp(b * rate). Points with
/// loss <= kFitLossFloor are dropped. R^2 is measured on the original
/// scale over the points used in the fit. The result does not depend on
/// the order of the input points.
ExponentialFit fit_exponential(std::span<const double> rates, std::span<const double> losses);
ExponentialFit fit_exponential(std::span<const CurvePoint> points);

/// build_curve followed by fit_exponential.
SensitivityCurve analyze_layer(const WeightTensor& w, const GradientTensor& g);

}  // namespace ccomp
