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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ccomp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Shape of a square-kernel convolution weight: n filters, c input
/// channels, k x k spatial support.
struct Shape {
  int n = 0;
  int c = 0;
  int k = 0;

  int kernel_area() const { return k * k; }
  int rows() const { return n; }
  int cols() const { return c * k * k; }
  /// Number of singular values of the matricized weight.
  int full_rank() const { return rows() < cols() ? rows() : cols(); }
  std::size_t size() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(cols());
  }
  bool valid() const { return n >= 1 && c >= 1 && k >= 1; }

  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Dense row-major (n, c, k, k) tensor. The tag keeps weights and
/// gradients from being mixed up at call sites.
template <typename Tag>
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape shape) : shape_(shape), values_(shape.size(), 0.0) {}
  Tensor4(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double& operator()(int o, int i, int y, int x) { return values_[offset(o, i, y, x)]; }
  double operator()(int o, int i, int y, int x) const { return values_[offset(o, i, y, x)]; }

  std::size_t offset(int o, int i, int y, int x) const {
    return ((static_cast<std::size_t>(o) * shape_.c + i) * shape_.k + y) * shape_.k + x;
  }

  bool all_finite() const;

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

struct WeightTag {};
struct GradientTag {};

using WeightTensor = Tensor4<WeightTag>;
using GradientTensor = Tensor4<GradientTag>;

/// phi^-1: (n, c, k, k) -> n x (c k^2). Column block j*k^2 .. (j+1)*k^2-1
/// holds input channel j.
template <typename Tag>
Matrix matricize(const Tensor4<Tag>& w);

/// phi: inverse of matricize.
WeightTensor dematricize(const Matrix& m, Shape shape);

/// Input / output activations laid out as (channels, height, width).
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int channels, int height, int width)
      : channels_(channels), height_(height), width_(width),
        values_(static_cast<std::size_t>(channels) * height * width, 0.0) {}

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }

  double& operator()(int ch, int y, int x) { return values_[index(ch, y, x)]; }
  double operator()(int ch, int y, int x) const { return values_[index(ch, y, x)]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

 private:
  std::size_t index(int ch, int y, int x) const {
    return (static_cast<std::size_t>(ch) * height_ + y) * width_ + x;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

}  // namespace ccomp
