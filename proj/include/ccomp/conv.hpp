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

#include "ccomp/compression.hpp"
#include "ccomp/tensor.hpp"

namespace ccomp {

/// Output spatial extent of a valid (unpadded) convolution.
int conv_output_size(int input, int kernel, int stride);

/// Direct convolution, valid padding. Validation only; no blocking or
/// vectorization.
FeatureMap reference_conv(const WeightTensor& weights, const FeatureMap& x, int stride);

/// Runs the compact form of a compressed layer on the full-width input:
/// the kept channels are selected, then either the pruned k x k conv or
/// the k x k conv with w1 followed by the 1 x 1 conv with w2 is applied.
FeatureMap reference_conv(const CompressedLayer& layer, const FeatureMap& x, int stride);

}  // namespace ccomp
