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

#include "ccomp/tensor.hpp"

#include <cmath>

#include "ccomp/errors.hpp"

namespace ccomp {

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," +
         std::to_string(s.k) + "," + std::to_string(s.k) + ")";
}

template <typename Tag>
Tensor4<Tag>::Tensor4(Shape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  if (!shape_.valid()) throw DataError("invalid tensor shape " + to_string(shape_));
  if (values_.size() != shape_.size()) {
    throw DataError("tensor of shape " + to_string(shape_) + " needs " +
                    std::to_string(shape_.size()) + " values, got " +
                    std::to_string(values_.size()));
  }
}

template <typename Tag>
bool Tensor4<Tag>::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename Tag>
Matrix matricize(const Tensor4<Tag>& w) {
  const Shape& s = w.shape();
  Matrix m(s.rows(), s.cols());
  auto v = w.values();
  // Row-major tensor and row-major n x ck^2 matrix share linear indices.
  for (int o = 0; o < s.rows(); ++o) {
    for (int j = 0; j < s.cols(); ++j) {
      m(o, j) = v[static_cast<std::size_t>(o) * s.cols() + j];
    }
  }
  return m;
}

WeightTensor dematricize(const Matrix& m, Shape shape) {
  if (!shape.valid() || m.rows() != shape.rows() || m.cols() != shape.cols()) {
    throw DataError("cannot dematricize " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()) + " matrix into " + to_string(shape));
  }
  std::vector<double> values(shape.size());
  for (int o = 0; o < shape.rows(); ++o) {
    for (int j = 0; j < shape.cols(); ++j) {
      values[static_cast<std::size_t>(o) * shape.cols() + j] = m(o, j);
    }
  }
  return WeightTensor(shape, std::move(values));
}

template class Tensor4<WeightTag>;
template class Tensor4<GradientTag>;
template Matrix matricize(const WeightTensor&);
template Matrix matricize(const GradientTensor&);

}  // namespace ccomp
