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

#include "ccomp/planner.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ccomp {

double rate_from_sensitivity(double a, double b, double sensitivity) {
  if (!(a > 0.0) || !(b > 0.0) || !(sensitivity > 0.0)) {
    throw DataError("rate_from_sensitivity needs a, b, sensitivity > 0");
  }
  return std::log(sensitivity / (a * b)) / b;
}

double flops_residual(std::span<const ExponentialModel> models, std::span<const double> flops,
                      double total_flops, double target_rate, double sensitivity) {
  double sum = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    sum += flops[i] / models[i].b * std::log(sensitivity / (models[i].a * models[i].b));
  }
  return sum - target_rate * total_flops;
}

namespace {

void validate(std::span<const ExponentialModel> models, std::span<const double> flops,
              double total_flops, double target_rate, const PlannerConfig& config) {
  if (models.empty()) throw DataError("rate planner needs at least one layer");
  if (models.size() != flops.size()) throw DataError("model and FLOPs counts differ");
  if (!(target_rate > 0.0 && target_rate < 1.0)) {
    throw UsageError("target compression rate must lie in (0, 1)");
  }
  if (!(total_flops > 0.0)) throw DataError("total FLOPs must be positive");
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (!(models[i].b > 0.0)) {
      throw NumericalError("layer " + std::to_string(i) + " has fitted b <= 0; exclude it " +
                           "from the joint solve and assign it the global rate");
    }
    if (!(models[i].a > 0.0)) throw NumericalError("layer " + std::to_string(i) + " has a <= 0");
    if (!(flops[i] > 0.0)) throw DataError("layer " + std::to_string(i) + " has FLOPs <= 0");
  }
  if (!(config.initial_sensitivity > 0.0)) throw UsageError("initial sensitivity must be > 0");
  if (config.eta < 0.0) throw UsageError("learning rate must be >= 0");
  if (!(config.stop_threshold > 0.0)) throw UsageError("stop threshold must be > 0");
  if (!(config.r_max > 0.0 && config.r_max < 1.0)) throw UsageError("r_max must lie in (0, 1)");
}

RatePlan finish(std::span<const ExponentialModel> models, std::span<const double> flops,
                double total_flops, double target_rate, const PlannerConfig& config,
                double sensitivity, long iterations) {
  RatePlan plan;
  plan.sensitivity = sensitivity;
  plan.iterations = iterations;
  plan.target_flops = target_rate * total_flops;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const double r = rate_from_sensitivity(models[i].a, models[i].b, sensitivity);
    const double clamped = std::clamp(r, 0.0, config.r_max);
    plan.unclamped_rates.push_back(r);
    plan.rates.push_back(clamped);
    plan.clamped.push_back(clamped != r);
    plan.achieved_flops += flops[i] * r;
    plan.clamped_flops += flops[i] * clamped;
  }
  return plan;
}

}  // namespace

RatePlan plan_rates(std::span<const ExponentialModel> models, std::span<const double> flops,
                    double total_flops, double target_rate, const PlannerConfig& config) {
  validate(models, flops, total_flops, target_rate, config);

  // Work on the objective divided by F^2 so the step size is independent
  // of the FLOPs unit; the stop test stays in absolute FLOPs^2.
  double slope_numerator = 0.0;  // sum F^i / (b^i F)
  for (std::size_t i = 0; i < models.size(); ++i) {
    slope_numerator += flops[i] / (models[i].b * total_flops);
  }

  double sensitivity = config.initial_sensitivity;
  long it = 0;
  for (;; ++it) {
    const double residual =
        flops_residual(models, flops, total_flops, target_rate, sensitivity);
    if (residual * residual <= config.stop_threshold) break;
    if (it >= config.max_iterations) {
      throw PlannerError("rate planner did not converge in " + std::to_string(it) +
                             " iterations (squared FLOPs error " +
                             std::to_string(residual * residual) + ")",
                         finish(models, flops, total_flops, target_rate, config, sensitivity, it));
    }
    const double scaled = residual / total_flops;
    const double slope = slope_numerator / sensitivity;
    const double gradient = 2.0 * scaled * slope;
    const double eta = config.eta > 0.0 ? config.eta : 1.0 / (2.0 * slope * slope);
    sensitivity = std::max(sensitivity - eta * gradient, config.min_sensitivity);
  }
  return finish(models, flops, total_flops, target_rate, config, sensitivity, it);
}

}  // namespace ccomp
