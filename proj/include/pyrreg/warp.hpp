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

#include "pyrreg/common.hpp"
#include "pyrreg/image.hpp"

namespace pyrreg {

/// Pulls f back through the field: out(y, x) = f(y - dy(y, x), x - dx(y, x)),
/// sampled bilinearly; coordinates outside the plane clamp to the border.
/// With a zero field this is an exact copy, including in float.
template <class Scalar>
Plane<Scalar> warp(const Plane<Scalar>& f, const DisplacementField<Scalar>& d) {
  const int h = static_cast<int>(f.rows());
  const int w = static_cast<int>(f.cols());
  require(d.height() == h && d.width() == w, "warp: field/image shape mismatch");
  Plane<Scalar> out(h, w);
  parallel_for(0, h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      Scalar sy = Scalar(y) - d.dy(y, x);
      Scalar sx = Scalar(x) - d.dx(y, x);
      sy = std::clamp(sy, Scalar(0), Scalar(h - 1));
      sx = std::clamp(sx, Scalar(0), Scalar(w - 1));
      const int y0 = std::min(static_cast<int>(sy), h - 1);
      const int x0 = std::min(static_cast<int>(sx), w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const int x1 = std::min(x0 + 1, w - 1);
      const Scalar fy = sy - Scalar(y0);
      const Scalar fx = sx - Scalar(x0);
      const Scalar top = f(y0, x0) * (Scalar(1) - fx) + f(y0, x1) * fx;
      const Scalar bot = f(y1, x0) * (Scalar(1) - fx) + f(y1, x1) * fx;
      out(y, x) = top * (Scalar(1) - fy) + bot * fy;
    }
  });
  return out;
}

template <class Scalar>
Image<Scalar> warp(const Image<Scalar>& f, const DisplacementField<Scalar>& d) {
  Image<Scalar> out;
  out.planes.reserve(f.planes.size());
  for (const auto& p : f.planes) out.planes.push_back(warp(p, d));
  return out;
}

/// Samples a field bilinearly at one continuous position (clamped), used by
/// the left-right consistency check.
template <class Scalar>
Scalar sample_bilinear(const Plane<Scalar>& p, Scalar y, Scalar x) {
  const int h = static_cast<int>(p.rows());
  const int w = static_cast<int>(p.cols());
  y = std::clamp(y, Scalar(0), Scalar(h - 1));
  x = std::clamp(x, Scalar(0), Scalar(w - 1));
  const int y0 = std::min(static_cast<int>(y), h - 1);
  const int x0 = std::min(static_cast<int>(x), w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const Scalar fy = y - Scalar(y0);
  const Scalar fx = x - Scalar(x0);
  const Scalar top = p(y0, x0) * (Scalar(1) - fx) + p(y0, x1) * fx;
  const Scalar bot = p(y1, x0) * (Scalar(1) - fx) + p(y1, x1) * fx;
  return top * (Scalar(1) - fy) + bot * fy;
}

}  // namespace pyrreg
