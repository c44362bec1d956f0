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

#include "ccomp/heuristic.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "ccomp/errors.hpp"

namespace ccomp {

int scoring_interval(int c, int r, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw UsageError("interval fraction must lie in (0, 1]");
  }
  // Small epsilon so exact products like 0.01 * 300 do not floor to 2.
  const int t = static_cast<int>(std::floor(fraction * (c + r) + 1e-9));
  return std::max(1, t);
}

std::vector<Unit> remaining_units(const ApproxState& state, UnitSelection selection) {
  std::vector<Unit> units = state.remaining_units();
  if (selection == UnitSelection::kJoint) return units;
  const bool want_channels = selection == UnitSelection::kPruningOnly;
  std::erase_if(units, [&](const Unit& u) { return u.is_channel() != want_channels; });
  return units;
}

namespace {

void require_member(const std::vector<Unit>& units, const Unit& o) {
  if (std::find(units.begin(), units.end(), o) == units.end()) {
    throw DataError(to_string(o) + " is not a remaining unit");
  }
}

double bruteforce_unchecked(const ApproxState& state, const LossEvaluator& loss, const Unit& o,
                            double gamma, UnitSelection selection) {
  ApproxState after = state;
  after.remove(o);
  const double own = loss(after.matrix());
  const std::vector<Unit> rest = remaining_units(after, selection);
  if (rest.empty() || gamma == 0.0) return own;
  double lookahead = 0.0;
  for (const Unit& i : rest) lookahead += loss(after.removed(i));
  return own + gamma * lookahead / static_cast<double>(rest.size());
}

double fast_unchecked(const ApproxState& state, const LossEvaluator& loss, const Unit& o,
                      double gamma, std::size_t rest_count, UnitSelection selection) {
  const Matrix candidate = state.removed(o);
  const auto g2 = loss.gradient_squared().array();
  const auto theta = (candidate - loss.weight()).array();

  const double own = (g2 * theta.square()).sum();
  if (rest_count == 0 || gamma == 0.0) return own;

  const bool channels = selection != UnitSelection::kDecompositionOnly;
  const bool singular_values = selection != UnitSelection::kPruningOnly;

  // Over the remaining channels, and separately over the remaining
  // singular values, the per-unit differences W_{i|o} - W_o sum to -W_o.
  const double cross = (g2 * theta * candidate.array()).sum();
  double spread = 0.0;
  if (channels) spread += (g2 * candidate.array().square()).sum();
  if (singular_values) {
    // S[G^2 * phi(U^2 Sigma^2 (V^2)^T)] for the SVD of the candidate.
    const SvdFactors* factors = &state.svd();
    SvdFactors recomputed;
    int skip = -1;
    if (o.is_channel()) {
      recomputed = thin_svd(candidate);
      factors = &recomputed;
    } else {
      skip = o.index;
    }
    const int rr = state.retained_rank();
    const Matrix weighted = loss.gradient_squared() * factors->v.leftCols(rr).array().square().matrix();
    for (int q = 0; q < rr; ++q) {
      if (q == skip) continue;
      const double s = factors->sigma(q);
      spread += s * s * (factors->u.col(q).array().square() * weighted.col(q).array()).sum();
    }
  }
  const double kinds = (channels ? 1.0 : 0.0) + (singular_values ? 1.0 : 0.0);
  const double m = static_cast<double>(rest_count);
  return (1.0 + gamma) * own + gamma / m * (spread - 2.0 * kinds * cross);
}

}  // namespace

double importance_bruteforce(const ApproxState& state, const LossEvaluator& loss, const Unit& o,
                             double gamma, UnitSelection selection) {
  const std::vector<Unit> units = remaining_units(state, selection);
  require_member(units, o);
  if (units.size() < 2) throw DataError("importance needs at least two remaining units");
  return bruteforce_unchecked(state, loss, o, gamma, selection);
}

double importance_fast(const ApproxState& state, const LossEvaluator& loss, const Unit& o,
                       double gamma, UnitSelection selection) {
  const std::vector<Unit> units = remaining_units(state, selection);
  require_member(units, o);
  if (units.size() < 2) throw DataError("importance needs at least two remaining units");
  return fast_unchecked(state, loss, o, gamma, units.size() - 1, selection);
}

double importance_bruteforce(const ApproxState& state, const WeightTensor& w,
                             const GradientTensor& g, const Unit& o, double gamma) {
  return importance_bruteforce(state, LossEvaluator(w, g), o, gamma);
}

double importance_fast(const ApproxState& state, const WeightTensor& w, const GradientTensor& g,
                       const Unit& o, double gamma) {
  return importance_fast(state, LossEvaluator(w, g), o, gamma);
}

namespace {

bool removable(const ApproxState& state, const Unit& u) {
  return u.is_channel() ? state.remaining_channels() > 1 : state.retained_rank() > 1;
}

LayerCompression finish(const ApproxState& state, std::string name, std::vector<Unit> removed,
                        int rounds, bool fallback) {
  LayerCompression out;
  out.layer = realize(state, std::move(name));
  out.approx = state.approx();
  out.achieved_rate = state.compression_rate();
  out.pruned_channels = state.pruned_count();
  out.removed_singular_values = state.removed_singular_values();
  out.pruning_fallback = fallback;
  out.removed = std::move(removed);
  out.rounds = rounds;
  return out;
}

}  // namespace

LayerCompression compress_layer(const WeightTensor& w, const GradientTensor& g,
                                const HeuristicConfig& cfg, std::string name) {
  if (!(cfg.gamma >= 0.0)) throw UsageError("gamma must be >= 0");
  if (!(cfg.target_rate > 0.0 && cfg.target_rate < 1.0)) {
    throw UsageError("layer target rate must lie in (0, 1)");
  }
  const LossEvaluator loss(w, g);
  ApproxState state(w);
  const int c = w.shape().c;
  const int interval = scoring_interval(c, state.full_rank(), cfg.interval_fraction);
  std::vector<Unit> removed;

  for (int round = 1;; ++round) {
    const std::vector<Unit> units = remaining_units(state, cfg.selection);
    const std::size_t rest = units.empty() ? 0 : units.size() - 1;

    std::vector<UnitImportance> scored;
    for (const Unit& u : units) {
      if (!removable(state, u)) continue;
      const double score = cfg.use_fast_metric
                               ? fast_unchecked(state, loss, u, cfg.gamma, rest, cfg.selection)
                               : bruteforce_unchecked(state, loss, u, cfg.gamma, cfg.selection);
      scored.push_back({u, score});
    }
    if (scored.empty()) {
      throw NumericalError("layer '" + name + "': target rate " + std::to_string(cfg.target_rate) +
                           " unreachable, reached " + std::to_string(state.compression_rate()) +
                           " with one unit of each kind left");
    }
    std::sort(scored.begin(), scored.end(), [](const UnitImportance& x, const UnitImportance& y) {
      // Channels sort ahead of singular values on equal score.
      return std::make_tuple(x.score, !x.unit.is_channel(), x.unit.index) <
             std::make_tuple(y.score, !y.unit.is_channel(), y.unit.index);
    });

    const std::size_t take = std::min<std::size_t>(interval, scored.size());
    std::vector<int> sv_taken;  // frozen rank positions already removed this round
    for (std::size_t s = 0; s < take; ++s) {
      Unit unit = scored[s].unit;
      if (!unit.is_channel()) {
        const int frozen = unit.index;
        unit.index -= static_cast<int>(
            std::count_if(sv_taken.begin(), sv_taken.end(), [&](int p) { return p < frozen; }));
        sv_taken.push_back(frozen);
      }
      if (!removable(state, unit)) continue;
      state.remove(unit);
      removed.push_back(unit);

      if (state.compression_rate() >= cfg.target_rate) {
        return finish(state, std::move(name), std::move(removed), round, false);
      }
      if (static_cast<double>(state.pruned_count()) / c >= cfg.target_rate) {
        ApproxState pruned_only(w);
        for (int ch : state.pruned_channels()) pruned_only.prune_channel(ch);
        return finish(pruned_only, std::move(name), std::move(removed), round, true);
      }
    }
  }
}

}  // namespace ccomp
