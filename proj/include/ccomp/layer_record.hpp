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

#include <cstdint>
#include <string>

#include "ccomp/tensor.hpp"

namespace ccomp {

/// One convolution layer as described by a network manifest.
struct LayerRecord {
  std::string name;
  int n = 0;
  int c = 0;
  int k = 0;
  int stride = 1;
  int h_out = 0;
  int w_out = 0;
  bool compressible = true;
  std::string weight_blob;
  std::string gradient_blob;

  Shape shape() const { return Shape{n, c, k}; }
  std::int64_t output_area() const {
    return static_cast<std::int64_t>(h_out) * static_cast<std::int64_t>(w_out);
  }
  std::size_t blob_bytes() const { return shape().size() * sizeof(float); }

  /// Throws DataError if any dimension is out of range.
  void validate() const;
};

}  // namespace ccomp
