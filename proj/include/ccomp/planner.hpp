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

#include "ccomp/errors.hpp"

namespace ccomp {

/// Fitted sensitivity model loss = a * exp(b * rate) of one layer.
struct ExponentialModel {
  double a = 0.0;
  double b = 0.0;
};

struct PlannerConfig {
  double initial_sensitivity = 0.1;
  /// Gradient-descent step on the FLOPs-normalized objective. 0 selects a
  /// per-iteration step equal to the inverse curvature of the objective
  /// (Gauss-Newton scaling), which makes the solver unit free.
  double eta = 0.0;
  /// Squared absolute FLOPs error at which descent stops.
  double stop_threshold = 1e4;
  long max_iterations = 1'000'000;
  /// Rates are clamped into [0, r_max] after the solve.
  double r_max = 0.95;
  double min_sensitivity = 1e-12;
};

struct RatePlan {
  std::vector<double> unclamped_rates;
  std::vector<double> rates;
  std::vector<bool> clamped;
  double sensitivity = 0.0;  // shared dI/dR across layers
  long iterations = 0;
  double achieved_flops = 0.0;  // sum F^i R^i before clamping
  double clamped_flops = 0.0;   // sum F^i R^i after clamping
  double target_flops = 0.0;    // C * F
};

/// Raised when descent exhausts its iteration budget; carries the last
/// iterate.
class PlannerError : public NumericalError {
 public:
  PlannerError(const std::string& what, RatePlan last)
      : NumericalError(what), last_(std::move(last)) {}
  const RatePlan& last_state() const { return last_; }

 private:
  RatePlan last_;
};

/// Rate at which a layer's sensitivity a*b*exp(b*R) equals `sensitivity`.
double rate_from_sensitivity(double a, double b, double sensitivity);

/// sum_i F^i / b^i * ln(sensitivity / (a^i b^i)) - C * F.
double flops_residual(std::span<const ExponentialModel> models, std::span<const double> flops,
                      double total_flops, double target_rate, double sensitivity);

/// Chooses per-layer compression rates whose sensitivities are all equal
/// and whose FLOPs-weighted sum removes target_rate of total_flops, by
/// gradient descent on the squared FLOPs residual over the shared
/// sensitivity. total_flops may include layers that are not listed.
RatePlan plan_rates(std::span<const ExponentialModel> models, std::span<const double> flops,
                    double total_flops, double target_rate, const PlannerConfig& config = {});

}  // namespace ccomp
