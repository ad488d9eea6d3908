// Copyright 2026 the pyrreg authors
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

#include <algorithm>
#include <cmath>
#include <vector>

#include "pyrreg/dataio.hpp"

namespace pyrreg {

namespace {

// Dark-purple to yellow, green strictly increasing so ordering survives
// grayscale conversion.
constexpr float kStops[5][3] = {
    {0.267f, 0.005f, 0.329f},
    {0.229f, 0.322f, 0.546f},
    {0.128f, 0.567f, 0.551f},
    {0.369f, 0.789f, 0.383f},
    {0.993f, 0.906f, 0.144f},
};

float auto_range(const Plane<float>& dx) {
  std::vector<float> mags;
  mags.reserve(static_cast<size_t>(dx.size()));
  for (int y = 0; y < dx.rows(); ++y)
    for (int x = 0; x < dx.cols(); ++x)
      if (std::isfinite(dx(y, x))) mags.push_back(std::abs(dx(y, x)));
  if (mags.empty()) return 1.0f;
  const size_t k = static_cast<size_t>(0.99 * double(mags.size() - 1));
  std::nth_element(mags.begin(), mags.begin() + long(k), mags.end());
  return std::max(mags[k], 1e-6f);
}

}  // namespace

Image<float> render_disparity(const Plane<float>& dx, float range_hint) {
  const float range = range_hint > 0 ? range_hint : auto_range(dx);
  const int h = static_cast<int>(dx.rows());
  const int w = static_cast<int>(dx.cols());
  Image<float> out(h, w, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!std::isfinite(dx(y, x))) continue;  // holes stay black
      const float t = std::clamp(dx(y, x) / range, 0.0f, 1.0f);
      const float pos = t * 4.0f;
      const int seg = std::min(3, static_cast<int>(pos));
      const float f = pos - float(seg);
      for (int c = 0; c < 3; ++c)
        out[c](y, x) = kStops[seg][c] * (1.0f - f) + kStops[seg + 1][c] * f;
    }
  return out;
}

}  // namespace pyrreg
