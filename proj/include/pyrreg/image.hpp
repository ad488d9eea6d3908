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

#include <Eigen/Core>
#include <string>
#include <vector>

#include "pyrreg/common.hpp"

namespace pyrreg {

/// One channel, row-major so that a row maps to a contiguous span of memory.
template <class Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Multi-channel image: a stack of equally sized planes.
template <class Scalar>
struct Image {
  std::vector<Plane<Scalar>> planes;

  Image() = default;
  Image(int height, int width, int channels) {
    require(height > 0 && width > 0 && channels > 0,
            "Image: dimensions must be positive");
    planes.assign(static_cast<size_t>(channels),
                  Plane<Scalar>::Zero(height, width));
  }

  int height() const {
    return planes.empty() ? 0 : static_cast<int>(planes[0].rows());
  }
  int width() const {
    return planes.empty() ? 0 : static_cast<int>(planes[0].cols());
  }
  int channels() const { return static_cast<int>(planes.size()); }

  Plane<Scalar>& operator[](int c) { return planes[static_cast<size_t>(c)]; }
  const Plane<Scalar>& operator[](int c) const {
    return planes[static_cast<size_t>(c)];
  }
};

/// Per-pixel 2D displacement. dx is the column offset, dy the row offset;
/// a feature seen at (y, x) in the first image sits at (y - dy, x - dx)
/// in the second.
template <class Scalar>
struct DisplacementField {
  Plane<Scalar> dx;
  Plane<Scalar> dy;

  DisplacementField() = default;
  DisplacementField(int height, int width)
      : dx(Plane<Scalar>::Zero(height, width)),
        dy(Plane<Scalar>::Zero(height, width)) {
    require(height > 0 && width > 0,
            "DisplacementField: dimensions must be positive");
  }

  int height() const { return static_cast<int>(dx.rows()); }
  int width() const { return static_cast<int>(dx.cols()); }
};

template <class Scalar>
void require_same_shape(const Image<Scalar>& a, const Image<Scalar>& b,
                        const std::string& where) {
  require(a.height() == b.height() && a.width() == b.width() &&
              a.channels() == b.channels(),
          where + ": shape mismatch");
}

template <class Scalar>
bool same_shape(const DisplacementField<Scalar>& d, const Image<Scalar>& f) {
  return d.height() == f.height() && d.width() == f.width();
}

/// Pads every side by replicating the border row/column.
template <class Scalar>
Plane<Scalar> replicate_pad(const Plane<Scalar>& p, int top, int bottom,
                            int left, int right) {
  require(top >= 0 && bottom >= 0 && left >= 0 && right >= 0,
          "replicate_pad: negative padding");
  const int h = static_cast<int>(p.rows());
  const int w = static_cast<int>(p.cols());
  Plane<Scalar> out(h + top + bottom, w + left + right);
  for (int y = 0; y < h + top + bottom; ++y) {
    const int sy = std::clamp(y - top, 0, h - 1);
    for (int x = 0; x < w + left + right; ++x) {
      const int sx = std::clamp(x - left, 0, w - 1);
      out(y, x) = p(sy, sx);
    }
  }
  return out;
}

template <class Scalar>
Image<Scalar> replicate_pad(const Image<Scalar>& img, int top, int bottom,
                            int left, int right) {
  Image<Scalar> out;
  out.planes.reserve(img.planes.size());
  for (const auto& p : img.planes)
    out.planes.push_back(replicate_pad(p, top, bottom, left, right));
  return out;
}

/// Stacks the channels of both inputs into one image (a's channels first).
template <class Scalar>
Image<Scalar> concat_channels(const Image<Scalar>& a, const Image<Scalar>& b) {
  require(a.height() == b.height() && a.width() == b.width(),
          "concat_channels: plane size mismatch");
  Image<Scalar> out;
  out.planes.reserve(a.planes.size() + b.planes.size());
  for (const auto& p : a.planes) out.planes.push_back(p);
  for (const auto& p : b.planes) out.planes.push_back(p);
  return out;
}

}  // namespace pyrreg
