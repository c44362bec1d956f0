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

#include "ccomp/compression.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "ccomp/errors.hpp"

namespace ccomp {

namespace {

bool valid_name_char(char ch) {
  return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' ||
         ch == '.' || ch == ':';
}

}  // namespace

void LayerRecord::validate() const {
  if (name.empty() || !std::all_of(name.begin(), name.end(), valid_name_char)) {
    throw DataError("invalid layer name '" + name +
                    "' (allowed: letters, digits, '_', '-', '.', ':')");
  }
  if (n < 1 || c < 1 || k < 1 || h_out < 1 || w_out < 1 || stride < 1) {
    throw DataError("layer '" + name + "': n, c, k, stride, h_out, w_out must all be >= 1");
  }
}

std::string to_string(const Unit& u) {
  return (u.is_channel() ? "channel " : "singular value ") + std::to_string(u.index);
}

SvdFactors thin_svd(const Matrix& m) {
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return SvdFactors{svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

double compression_rate(int n, int c, int k, int t1, int t2, int r) {
  if (t2 == 0) return static_cast<double>(t1) / c;
  const std::int64_t kk = static_cast<std::int64_t>(k) * k;
  const std::int64_t kept = static_cast<std::int64_t>(r - t2) * ((c - t1) * kk + n);
  const std::int64_t dense = static_cast<std::int64_t>(n) * c * kk;
  return 1.0 - static_cast<double>(kept) / static_cast<double>(dense);
}

// --- ApproxState -----------------------------------------------------------

ApproxState::ApproxState(const WeightTensor& w)
    : shape_(w.shape()), approx_(matricize(w)), pruned_(w.shape().c, false) {
  if (!shape_.valid()) throw DataError("invalid weight shape " + to_string(shape_));
  recompute_svd();
}

int ApproxState::nonzero_rank() const {
  const int rr = retained_rank();
  if (rr == 0 || svd_.sigma(0) <= 0.0) return 0;
  const double cutoff = kRankTolerance * svd_.sigma(0);
  int count = 0;
  for (int j = 0; j < rr; ++j) {
    if (svd_.sigma(j) > cutoff) ++count;
  }
  return count;
}

std::vector<int> ApproxState::pruned_channels() const {
  std::vector<int> out;
  for (int i = 0; i < shape_.c; ++i) {
    if (pruned_[i]) out.push_back(i);
  }
  return out;
}

std::vector<int> ApproxState::kept_channels() const {
  std::vector<int> out;
  for (int i = 0; i < shape_.c; ++i) {
    if (!pruned_[i]) out.push_back(i);
  }
  return out;
}

std::vector<Unit> ApproxState::remaining_units() const {
  std::vector<Unit> units;
  units.reserve(remaining_channels() + retained_rank());
  for (int i = 0; i < shape_.c; ++i) {
    if (!pruned_[i]) units.push_back(Unit::channel(i));
  }
  for (int j = 0; j < retained_rank(); ++j) units.push_back(Unit::singular_value(j));
  return units;
}

bool ApproxState::contains(const Unit& u) const {
  if (u.is_channel()) return u.index >= 0 && u.index < shape_.c && !pruned_[u.index];
  return u.index >= 0 && u.index < retained_rank();
}

double ApproxState::compression_rate() const {
  return ccomp::compression_rate(shape_.n, shape_.c, shape_.k, pruned_count_, removed_sv_,
                                 full_rank());
}

void ApproxState::check(const Unit& u) const {
  if (u.is_channel()) {
    if (u.index < 0 || u.index >= shape_.c) {
      throw DataError("channel index " + std::to_string(u.index) + " out of range [0, " +
                      std::to_string(shape_.c) + ")");
    }
    if (pruned_[u.index]) {
      throw DataError("channel " + std::to_string(u.index) + " is already pruned");
    }
  } else {
    if (u.index < 0 || u.index >= full_rank()) {
      throw DataError("singular value position " + std::to_string(u.index) +
                      " out of range [0, " + std::to_string(full_rank()) + ")");
    }
    if (u.index >= retained_rank()) {
      throw DataError("singular value at position " + std::to_string(u.index) +
                      " was already removed");
    }
  }
}

void ApproxState::zero_pruned_columns(Matrix& m) const {
  const int kk = shape_.kernel_area();
  for (int i = 0; i < shape_.c; ++i) {
    if (pruned_[i]) m.middleCols(static_cast<Eigen::Index>(i) * kk, kk).setZero();
  }
}

void ApproxState::recompute_svd() {
  svd_ = thin_svd(approx_);
  for (int j = retained_rank(); j < full_rank(); ++j) svd_.sigma(j) = 0.0;
}

void ApproxState::prune_channel(int channel) {
  check(Unit::channel(channel));
  pruned_[channel] = true;
  ++pruned_count_;
  const int kk = shape_.kernel_area();
  approx_.middleCols(static_cast<Eigen::Index>(channel) * kk, kk).setZero();
  recompute_svd();
}

void ApproxState::remove_singular_value(int position) {
  check(Unit::singular_value(position));
  const int rr = retained_rank();
  approx_.noalias() -= svd_.sigma(position) * svd_.u.col(position) * svd_.v.col(position).transpose();
  zero_pruned_columns(approx_);

  // Keep retained values in front, in descending order: move the removed
  // triple to the boundary and zero its singular value.
  for (int j = position; j + 1 < rr; ++j) {
    svd_.u.col(j).swap(svd_.u.col(j + 1));
    svd_.v.col(j).swap(svd_.v.col(j + 1));
    std::swap(svd_.sigma(j), svd_.sigma(j + 1));
  }
  svd_.sigma(rr - 1) = 0.0;
  ++removed_sv_;
}

void ApproxState::remove(const Unit& u) {
  if (u.is_channel()) {
    prune_channel(u.index);
  } else {
    remove_singular_value(u.index);
  }
}

Matrix ApproxState::removed(const Unit& u) const {
  check(u);
  Matrix m = approx_;
  if (u.is_channel()) {
    const int kk = shape_.kernel_area();
    m.middleCols(static_cast<Eigen::Index>(u.index) * kk, kk).setZero();
  } else {
    m.noalias() -= svd_.sigma(u.index) * svd_.u.col(u.index) * svd_.v.col(u.index).transpose();
    zero_pruned_columns(m);
  }
  return m;
}

ApproxState prune_channel(ApproxState state, int channel) {
  state.prune_channel(channel);
  return state;
}

ApproxState remove_singular_value(ApproxState state, int position) {
  state.remove_singular_value(position);
  return state;
}

// --- CompressedLayer -------------------------------------------------------

int CompressedLayer::rank() const {
  if (const auto* d = std::get_if<Decomposed>(&factors)) return d->w1.shape().n;
  return 0;
}

int CompressedLayer::removed_singular_values() const {
  return decomposed() ? original.full_rank() - rank() : 0;
}

std::int64_t CompressedLayer::parameter_count() const {
  const std::int64_t kept = static_cast<std::int64_t>(kept_channels.size());
  const std::int64_t kk = original.kernel_area();
  if (decomposed()) {
    const std::int64_t rb = rank();
    return rb * kept * kk + static_cast<std::int64_t>(original.n) * rb;
  }
  return static_cast<std::int64_t>(original.n) * kept * kk;
}

double CompressedLayer::compression_rate() const {
  return 1.0 - static_cast<double>(parameter_count()) /
                   static_cast<double>(dense_parameter_count(original));
}

void CompressedLayer::validate() const {
  const std::string where = "compressed layer '" + source_layer + "': ";
  if (!original.valid()) throw DataError(where + "invalid original shape");
  if (kept_channels.empty()) throw DataError(where + "no input channels kept");
  if (!std::is_sorted(kept_channels.begin(), kept_channels.end()) ||
      std::adjacent_find(kept_channels.begin(), kept_channels.end()) != kept_channels.end() ||
      kept_channels.front() < 0 || kept_channels.back() >= original.c) {
    throw DataError(where + "kept channels must be strictly ascending within [0, c)");
  }
  const int kept = static_cast<int>(kept_channels.size());
  if (const auto* p = std::get_if<PrunedOnly>(&factors)) {
    if (p->weights.shape() != Shape{original.n, kept, original.k}) {
      throw DataError(where + "pruned weight shape " + to_string(p->weights.shape()) +
                      " does not match (n, kept, k, k)");
    }
  } else {
    const auto& d = std::get<Decomposed>(factors);
    const int rb = d.w1.shape().n;
    if (rb < 1 || rb > original.full_rank()) throw DataError(where + "rank out of range");
    if (d.w1.shape() != Shape{rb, kept, original.k}) {
      throw DataError(where + "w1 shape " + to_string(d.w1.shape()) + " is inconsistent");
    }
    if (d.w2.shape() != Shape{original.n, rb, 1}) {
      throw DataError(where + "w2 shape " + to_string(d.w2.shape()) + " is inconsistent");
    }
  }
}

WeightTensor CompressedLayer::expand() const {
  WeightTensor dense(original);
  const int k = original.k;
  if (const auto* p = std::get_if<PrunedOnly>(&factors)) {
    for (int o = 0; o < original.n; ++o)
      for (std::size_t jj = 0; jj < kept_channels.size(); ++jj)
        for (int y = 0; y < k; ++y)
          for (int x = 0; x < k; ++x)
            dense(o, kept_channels[jj], y, x) = p->weights(o, static_cast<int>(jj), y, x);
    return dense;
  }
  const auto& d = std::get<Decomposed>(factors);
  const Matrix m1 = matricize(d.w1);  // r_bar x kept*k^2
  const Matrix m2 = matricize(d.w2);  // n x r_bar
  const Matrix product = m2 * m1;
  const int kk = original.kernel_area();
  for (int o = 0; o < original.n; ++o)
    for (std::size_t jj = 0; jj < kept_channels.size(); ++jj)
      for (int q = 0; q < kk; ++q)
        dense(o, kept_channels[jj], q / k, q % k) =
            product(o, static_cast<Eigen::Index>(jj) * kk + q);
  return dense;
}

CompressedLayer passthrough(const WeightTensor& w, std::string name) {
  std::vector<int> kept(w.shape().c);
  for (int i = 0; i < w.shape().c; ++i) kept[i] = i;
  return CompressedLayer{std::move(name), w.shape(), std::move(kept), PrunedOnly{w}};
}

CompressedLayer realize(const ApproxState& state, std::string name) {
  const Shape& s = state.shape();
  const std::vector<int> kept = state.kept_channels();
  if (kept.empty()) throw DataError("cannot realize layer '" + name + "': all channels pruned");
  const int nk = static_cast<int>(kept.size());
  const int k = s.k;
  const int kk = s.kernel_area();
  const Matrix& m = state.matrix();

  if (state.removed_singular_values() == 0) {
    WeightTensor w(Shape{s.n, nk, k});
    for (int o = 0; o < s.n; ++o)
      for (int jj = 0; jj < nk; ++jj)
        for (int q = 0; q < kk; ++q)
          w(o, jj, q / k, q % k) = m(o, static_cast<Eigen::Index>(kept[jj]) * kk + q);
    return CompressedLayer{std::move(name), s, kept, PrunedOnly{std::move(w)}};
  }

  const int rb = state.retained_rank();
  if (rb < 1) {
    throw DataError("cannot realize layer '" + name + "': every singular value removed");
  }
  const SvdFactors& f = state.svd();
  WeightTensor w1(Shape{rb, nk, k});
  WeightTensor w2(Shape{s.n, rb, 1});
  for (int q = 0; q < rb; ++q) {
    const double root = std::sqrt(f.sigma(q));
    for (int jj = 0; jj < nk; ++jj)
      for (int p = 0; p < kk; ++p)
        w1(q, jj, p / k, p % k) = root * f.v(static_cast<Eigen::Index>(kept[jj]) * kk + p, q);
    for (int o = 0; o < s.n; ++o) w2(o, q, 0, 0) = f.u(o, q) * root;
  }
  return CompressedLayer{std::move(name), s, kept, Decomposed{std::move(w1), std::move(w2)}};
}

std::int64_t dense_parameter_count(const Shape& s) {
  return static_cast<std::int64_t>(s.n) * s.c * s.kernel_area();
}

std::int64_t layer_flops(const LayerRecord& rec) {
  return dense_parameter_count(rec.shape()) * rec.output_area();
}

std::int64_t compressed_flops(const CompressedLayer& layer, const LayerRecord& rec) {
  return layer.parameter_count() * rec.output_area();
}

}  // namespace ccomp
