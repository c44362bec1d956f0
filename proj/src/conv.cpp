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

#include "ccomp/conv.hpp"

#include <string>

#include "ccomp/errors.hpp"

namespace ccomp {

int conv_output_size(int input, int kernel, int stride) {
  if (stride < 1) throw DataError("stride must be >= 1");
  if (input < kernel) {
    throw DataError("input extent " + std::to_string(input) + " smaller than kernel " +
                    std::to_string(kernel));
  }
  return (input - kernel) / stride + 1;
}

FeatureMap reference_conv(const WeightTensor& weights, const FeatureMap& x, int stride) {
  const Shape& s = weights.shape();
  if (x.channels() != s.c) {
    throw DataError("input has " + std::to_string(x.channels()) + " channels, weight expects " +
                    std::to_string(s.c));
  }
  const int ho = conv_output_size(x.height(), s.k, stride);
  const int wo = conv_output_size(x.width(), s.k, stride);
  FeatureMap y(s.n, ho, wo);
  for (int o = 0; o < s.n; ++o) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        double acc = 0.0;
        for (int i = 0; i < s.c; ++i)
          for (int ky = 0; ky < s.k; ++ky)
            for (int kx = 0; kx < s.k; ++kx)
              acc += weights(o, i, ky, kx) * x(i, oy * stride + ky, ox * stride + kx);
        y(o, oy, ox) = acc;
      }
    }
  }
  return y;
}

namespace {

FeatureMap select_channels(const FeatureMap& x, const std::vector<int>& channels) {
  FeatureMap out(static_cast<int>(channels.size()), x.height(), x.width());
  for (std::size_t j = 0; j < channels.size(); ++j)
    for (int yy = 0; yy < x.height(); ++yy)
      for (int xx = 0; xx < x.width(); ++xx)
        out(static_cast<int>(j), yy, xx) = x(channels[j], yy, xx);
  return out;
}

}  // namespace

FeatureMap reference_conv(const CompressedLayer& layer, const FeatureMap& x, int stride) {
  layer.validate();
  if (x.channels() != layer.original.c) {
    throw DataError("input has " + std::to_string(x.channels()) +
                    " channels, compressed layer was built for " +
                    std::to_string(layer.original.c));
  }
  const FeatureMap selected = select_channels(x, layer.kept_channels);
  if (const auto* p = std::get_if<PrunedOnly>(&layer.factors)) {
    return reference_conv(p->weights, selected, stride);
  }
  const auto& d = std::get<Decomposed>(layer.factors);
  return reference_conv(d.w2, reference_conv(d.w1, selected, stride), 1);
}

}  // namespace ccomp
