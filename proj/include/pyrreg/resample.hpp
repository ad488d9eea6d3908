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

#include "pyrreg/image.hpp"

namespace pyrreg {

/// Halves each dimension by averaging 2x2 blocks. Odd sizes replicate the
/// last row/column so the output is always ceil(size / 2).
template <class Scalar>
Plane<Scalar> downsample_half(const Plane<Scalar>& p) {
  const int h = static_cast<int>(p.rows());
  const int w = static_cast<int>(p.cols());
  require(h >= 2 && w >= 2, "downsample_half: input must be at least 2x2");
  const int oh = (h + 1) / 2;
  const int ow = (w + 1) / 2;
  Plane<Scalar> out(oh, ow);
  for (int y = 0; y < oh; ++y) {
    const int y0 = 2 * y;
    const int y1 = std::min(2 * y + 1, h - 1);
    for (int x = 0; x < ow; ++x) {
      const int x0 = 2 * x;
      const int x1 = std::min(2 * x + 1, w - 1);
      out(y, x) = (p(y0, x0) + p(y0, x1) + p(y1, x0) + p(y1, x1)) / Scalar(4);
    }
  }
  return out;
}

template <class Scalar>
Image<Scalar> downsample_half(const Image<Scalar>& img) {
  require(img.channels() > 0, "downsample_half: empty image");
  Image<Scalar> out;
  out.planes.reserve(img.planes.size());
  for (const auto& p : img.planes) out.planes.push_back(downsample_half(p));
  return out;
}

/// Bilinear resize with corner alignment: output sample t reads source
/// coordinate t * (src - 1) / (dst - 1), so the first and last samples map
/// exactly onto the source corners and constants stay constant.
template <class Scalar>
Plane<Scalar> resize_bilinear(const Plane<Scalar>& p, int out_h, int out_w) {
  require(out_h > 0 && out_w > 0, "resize_bilinear: bad target size");
  const int h = static_cast<int>(p.rows());
  const int w = static_cast<int>(p.cols());
  Plane<Scalar> out(out_h, out_w);
  const Scalar sy_step =
      out_h > 1 ? Scalar(h - 1) / Scalar(out_h - 1) : Scalar(0);
  const Scalar sx_step =
      out_w > 1 ? Scalar(w - 1) / Scalar(out_w - 1) : Scalar(0);
  for (int y = 0; y < out_h; ++y) {
    const Scalar sy = Scalar(y) * sy_step;
    const int y0 = std::min(static_cast<int>(sy), h - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const Scalar fy = sy - Scalar(y0);
    for (int x = 0; x < out_w; ++x) {
      const Scalar sx = Scalar(x) * sx_step;
      const int x0 = std::min(static_cast<int>(sx), w - 1);
      const int x1 = std::min(x0 + 1, w - 1);
      const Scalar fx = sx - Scalar(x0);
      const Scalar top = p(y0, x0) * (Scalar(1) - fx) + p(y0, x1) * fx;
      const Scalar bot = p(y1, x0) * (Scalar(1) - fx) + p(y1, x1) * fx;
      out(y, x) = top * (Scalar(1) - fy) + bot * fy;
    }
  }
  return out;
}

/// Expands a half-resolution field back to the shape it was downsampled
/// from. The target must be the exact pre-halving shape (2h or 2h-1 per
/// dimension). Values are interpolated, never rescaled; the factor two a
/// coarse displacement represents at fine scale is applied by the caller.
template <class Scalar>
DisplacementField<Scalar> upsample_double(const DisplacementField<Scalar>& d,
                                          int target_h, int target_w) {
  const int h = d.height();
  const int w = d.width();
  require(target_h == 2 * h || target_h == 2 * h - 1,
          "upsample_double: target height must be 2h or 2h-1");
  require(target_w == 2 * w || target_w == 2 * w - 1,
          "upsample_double: target width must be 2w or 2w-1");
  DisplacementField<Scalar> out;
  out.dx = resize_bilinear(d.dx, target_h, target_w);
  out.dy = resize_bilinear(d.dy, target_h, target_w);
  return out;
}

}  // namespace pyrreg
