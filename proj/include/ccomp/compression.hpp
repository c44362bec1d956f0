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

#include <compare>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ccomp/layer_record.hpp"
#include "ccomp/tensor.hpp"

namespace ccomp {

// Singular values below this fraction of the largest one count as zero
// when reporting the numerical rank.
inline constexpr double kRankTolerance = 1e-10;

enum class UnitKind { kChannel, kSingularValue };

/// A removable compression unit: an input channel, or a singular value
/// addressed by its descending rank position in the current SVD.
struct Unit {
  UnitKind kind = UnitKind::kChannel;
  int index = 0;

  static Unit channel(int i) { return {UnitKind::kChannel, i}; }
  static Unit singular_value(int j) { return {UnitKind::kSingularValue, j}; }

  bool is_channel() const { return kind == UnitKind::kChannel; }

  friend auto operator<=>(const Unit&, const Unit&) = default;
};

std::string to_string(const Unit& u);

/// Thin SVD, columns ordered by descending singular value.
struct SvdFactors {
  Matrix u;      // rows x r
  Vector sigma;  // r
  Matrix v;      // cols x r
};

SvdFactors thin_svd(const Matrix& m);

/// Fraction of parameters removed from an (n, c, k, k) layer after pruning
/// t1 input channels and dropping t2 of its r singular values. With t2 = 0
/// the layer stays a single pruned convolution and the rate is t1 / c;
/// otherwise it becomes a (r - t2)-rank factor pair and the rate can go
/// negative for small t2.
double compression_rate(int n, int c, int k, int t1, int t2, int r);

/// Evolving approximation W-bar of one layer's weight together with the
/// bookkeeping needed to keep removing units from it.
///
/// Invariants maintained by every mutation:
///  - matricized columns of pruned channels are exactly zero;
///  - svd() reconstructs matrix() (up to round-off);
///  - singular values at positions >= retained_rank() are exactly zero.
class ApproxState {
 public:
  explicit ApproxState(const WeightTensor& w);

  const Shape& shape() const { return shape_; }
  const Matrix& matrix() const { return approx_; }
  WeightTensor approx() const { return dematricize(approx_, shape_); }
  const SvdFactors& svd() const { return svd_; }

  int full_rank() const { return shape_.full_rank(); }
  int pruned_count() const { return pruned_count_; }
  int removed_singular_values() const { return removed_sv_; }
  int retained_rank() const { return full_rank() - removed_sv_; }
  /// Count of retained singular values above kRankTolerance * sigma_max.
  int nonzero_rank() const;
  int remaining_channels() const { return shape_.c - pruned_count_; }

  bool is_pruned(int channel) const { return pruned_.at(channel); }
  std::vector<int> pruned_channels() const;
  std::vector<int> kept_channels() const;

  /// Unpruned channels (ascending) followed by retained rank positions.
  std::vector<Unit> remaining_units() const;
  bool contains(const Unit& u) const;

  double compression_rate() const;

  void prune_channel(int channel);
  void remove_singular_value(int position);
  void remove(const Unit& u);

  /// f(W-bar, u) in matricized form; leaves the state untouched.
  Matrix removed(const Unit& u) const;

 private:
  void recompute_svd();
  void zero_pruned_columns(Matrix& m) const;
  void check(const Unit& u) const;

  Shape shape_;
  Matrix approx_;
  SvdFactors svd_;
  std::vector<bool> pruned_;
  int pruned_count_ = 0;
  int removed_sv_ = 0;
};

ApproxState prune_channel(ApproxState state, int channel);
ApproxState remove_singular_value(ApproxState state, int position);

struct PrunedOnly {
  WeightTensor weights;  // (n, c - t1, k, k)
};

struct Decomposed {
  WeightTensor w1;  // (r_bar, c - t1, k, k)
  WeightTensor w2;  // (n, r_bar, 1, 1)
};

/// Compact realization of a compressed layer.
struct CompressedLayer {
  std::string source_layer;
  Shape original;
  std::vector<int> kept_channels;  // ascending
  std::variant<PrunedOnly, Decomposed> factors;

  bool decomposed() const { return std::holds_alternative<Decomposed>(factors); }
  int pruned_count() const { return original.c - static_cast<int>(kept_channels.size()); }
  /// r_bar for decomposed layers, 0 otherwise.
  int rank() const;
  int removed_singular_values() const;
  std::int64_t parameter_count() const;
  double compression_rate() const;

  /// Throws DataError when factor shapes disagree with the metadata.
  void validate() const;

  /// Dense (n, c, k, k) weight equivalent to the factors, with zeros at
  /// pruned channels.
  WeightTensor expand() const;
};

/// Identity realization: every channel kept, no decomposition.
CompressedLayer passthrough(const WeightTensor& w, std::string name);

CompressedLayer realize(const ApproxState& state, std::string name = {});

std::int64_t dense_parameter_count(const Shape& s);

std::int64_t layer_flops(const LayerRecord& rec);
std::int64_t compressed_flops(const CompressedLayer& layer, const LayerRecord& rec);

}  // namespace ccomp
