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

#pragma once

#include <cmath>
#include <vector>

#include "pyrreg/image.hpp"

namespace pyrreg {

/// Normalized 1D gaussian taps for radius ceil(3 * sigma). sigma 0 gives the
/// identity kernel; negative sigma is rejected.
template <class Scalar>
std::vector<Scalar> gaussian_kernel(Scalar sigma) {
  require(sigma >= Scalar(0), "gaussian_kernel: sigma must be nonnegative");
  if (sigma == Scalar(0)) return {Scalar(1)};
  const int radius = static_cast<int>(std::ceil(3.0 * static_cast<double>(sigma)));
  std::vector<Scalar> k(static_cast<size_t>(2 * radius + 1));
  Scalar sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    const Scalar v = std::exp(Scalar(-0.5) * Scalar(i) * Scalar(i) / (sigma * sigma));
    k[static_cast<size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable gaussian with replicate borders. The kernel sums to one, so a
/// constant plane passes through unchanged; near the border the replicated
/// samples re-weight values, which does shift the overall mean of
/// non-constant inputs.
template <class Scalar>
Plane<Scalar> gaussian_blur(const Plane<Scalar>& p, Scalar sigma) {
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  if (radius == 0) return p;
  const int h = static_cast<int>(p.rows());
  const int w = static_cast<int>(p.cols());

  Plane<Scalar> tmp(h, w);
  parallel_for(0, h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      Scalar acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        const int sx = std::clamp(x + i, 0, w - 1);
        acc += k[static_cast<size_t>(i + radius)] * p(y, sx);
      }
      tmp(y, x) = acc;
    }
  });

  Plane<Scalar> out(h, w);
  parallel_for(0, h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      Scalar acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        const int sy = std::clamp(y + i, 0, h - 1);
        acc += k[static_cast<size_t>(i + radius)] * tmp(sy, x);
      }
      out(y, x) = acc;
    }
  });
  return out;
}

template <class Scalar>
Image<Scalar> gaussian_blur(const Image<Scalar>& img, Scalar sigma) {
  Image<Scalar> out;
  out.planes.reserve(img.planes.size());
  for (const auto& p : img.planes) out.planes.push_back(gaussian_blur(p, sigma));
  return out;
}

template <class Scalar>
DisplacementField<Scalar> gaussian_blur(const DisplacementField<Scalar>& d,
                                        Scalar sigma) {
  DisplacementField<Scalar> out;
  out.dx = gaussian_blur(d.dx, sigma);
  out.dy = gaussian_blur(d.dy, sigma);
  return out;
}

}  // namespace pyrreg
