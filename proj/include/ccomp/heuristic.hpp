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

#include <string>
#include <vector>

#include "ccomp/compression.hpp"
#include "ccomp/sensitivity.hpp"

namespace ccomp {

/// Which kinds of units the compressor may remove.
enum class UnitSelection { kJoint, kPruningOnly, kDecompositionOnly };

struct HeuristicConfig {
  double gamma = 0.5;
  double interval_fraction = 0.01;
  double target_rate = 0.5;
  bool use_fast_metric = true;
  UnitSelection selection = UnitSelection::kJoint;
};

struct UnitImportance {
  Unit unit;
  double score = 0.0;
};

/// Units removed per scoring round: floor(fraction * (c + r)), at least 1.
int scoring_interval(int c, int r, double fraction);

/// Remaining units of `state` that belong to the compression space.
std::vector<Unit> remaining_units(const ApproxState& state, UnitSelection selection);

/// Importance of removing `o`: its own loss plus gamma times the mean loss
/// of removing each other remaining unit afterwards, all evaluated
/// explicitly. Needs at least two remaining units.
double importance_bruteforce(const ApproxState& state, const LossEvaluator& loss, const Unit& o,
                             double gamma, UnitSelection selection = UnitSelection::kJoint);

/// Same quantity in closed form. The look-ahead sum collapses to four
/// Frobenius-type reductions over the candidate weight W_o and the SVD of
/// W_o, so it costs one decomposition per channel candidate and none per
/// singular-value candidate.
double importance_fast(const ApproxState& state, const LossEvaluator& loss, const Unit& o,
                       double gamma, UnitSelection selection = UnitSelection::kJoint);

double importance_bruteforce(const ApproxState& state, const WeightTensor& w,
                             const GradientTensor& g, const Unit& o, double gamma);
double importance_fast(const ApproxState& state, const WeightTensor& w, const GradientTensor& g,
                       const Unit& o, double gamma);

/// Outcome of compressing one layer.
struct LayerCompression {
  CompressedLayer layer;
  WeightTensor approx;  // final W_bar (dense, zeros at pruned channels)
  double achieved_rate = 0.0;
  int pruned_channels = 0;          // t1
  int removed_singular_values = 0;  // t2
  bool pruning_fallback = false;
  std::vector<Unit> removed;  // removal order, indexed against the state at removal time
  int rounds = 0;
};

/// Multi-step heuristic compression of one layer up to cfg.target_rate.
/// Each round scores every remaining unit, then removes the
/// scoring_interval() lowest-scored ones one at a time, stopping as soon as
/// the rate reaches the target. If the pruned channels alone reach the
/// target, the decomposition is discarded and the layer is rebuilt from
/// the original weight with channel pruning only. At least one channel and
/// one singular value are always kept.
LayerCompression compress_layer(const WeightTensor& w, const GradientTensor& g,
                                const HeuristicConfig& cfg, std::string name = {});

}  // namespace ccomp
