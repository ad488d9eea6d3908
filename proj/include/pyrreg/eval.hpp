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
#include <cstdint>
#include <cstdio>
#include <string>

#include "pyrreg/warp.hpp"

namespace pyrreg {

/// Bad-pixel fractions at the 1/2/5 px thresholds plus extremes, computed
/// over the pixels that survived hole and (optionally) occlusion filtering.
struct EvalReport {
  double bad1 = 0, bad2 = 0, bad5 = 0;
  double max_error = 0;
  double occlusion_fraction = 0;
  long evaluated_pixels = 0;
};

enum class MaskPolicy { all, non_occluded };

using OcclusionMask = Plane<std::uint8_t>;

struct OcclusionResult {
  OcclusionMask occluded;
  double fraction = 0;
};

/// Left-right consistency: a pixel is occluded when following its left
/// disparity into the right view and adding the right disparity found there
/// does not come back within tol. Looks up the right field bilinearly.
template <class Scalar>
OcclusionResult occlusion_mask(const DisplacementField<Scalar>& d_left,
                               const DisplacementField<Scalar>& d_right,
                               Scalar tol) {
  require(d_left.height() == d_right.height() &&
              d_left.width() == d_right.width(),
          "occlusion_mask: shape mismatch");
  require(tol >= Scalar(0), "occlusion_mask: negative tolerance");
  const int h = d_left.height();
  const int w = d_left.width();
  OcclusionResult res;
  res.occluded = OcclusionMask::Zero(h, w);
  long count = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Scalar sy = Scalar(y) - d_left.dy(y, x);
      const Scalar sx = Scalar(x) - d_left.dx(y, x);
      const Scalar ex = d_left.dx(y, x) + sample_bilinear(d_right.dx, sy, sx);
      const Scalar ey = d_left.dy(y, x) + sample_bilinear(d_right.dy, sy, sx);
      if (std::max(std::abs(ex), std::abs(ey)) > tol) {
        res.occluded(y, x) = 1;
        ++count;
      }
    }
  res.fraction = double(count) / double(h * w);
  return res;
}

/// Disparity accuracy against a ground-truth grid whose holes are marked by
/// non-finite values. Error is measured on dx (the stereo component). Under
/// the non_occluded policy an occlusion mask must be supplied and flagged
/// pixels are excluded on top of the holes.
template <class Scalar>
EvalReport bad_pixel_report(const DisplacementField<Scalar>& pred,
                            const Plane<Scalar>& gt, MaskPolicy policy,
                            const OcclusionMask* occlusion = nullptr) {
  require(pred.height() == gt.rows() && pred.width() == gt.cols(),
          "bad_pixel_report: shape mismatch");
  if (policy == MaskPolicy::non_occluded)
    require(occlusion != nullptr,
            "bad_pixel_report: non_occluded policy needs an occlusion mask");
  if (occlusion)
    require(occlusion->rows() == gt.rows() && occlusion->cols() == gt.cols(),
            "bad_pixel_report: occlusion mask shape mismatch");

  EvalReport rep;
  long n = 0, n1 = 0, n2 = 0, n5 = 0;
  long valid = 0, occluded_valid = 0;
  for (int y = 0; y < gt.rows(); ++y)
    for (int x = 0; x < gt.cols(); ++x) {
      if (!std::isfinite(gt(y, x))) continue;
      ++valid;
      const bool occl = occlusion && (*occlusion)(y, x) != 0;
      if (occl) ++occluded_valid;
      if (policy == MaskPolicy::non_occluded && occl) continue;
      const double e = std::abs(double(pred.dx(y, x)) - double(gt(y, x)));
      ++n;
      if (e > 1.0) ++n1;
      if (e > 2.0) ++n2;
      if (e > 5.0) ++n5;
      rep.max_error = std::max(rep.max_error, e);
    }
  require(n > 0, "bad_pixel_report: no pixels to evaluate");
  rep.bad1 = double(n1) / double(n);
  rep.bad2 = double(n2) / double(n);
  rep.bad5 = double(n5) / double(n);
  rep.evaluated_pixels = n;
  rep.occlusion_fraction = valid > 0 ? double(occluded_valid) / double(valid) : 0;
  return rep;
}

/// One machine-readable record per scene: name, rates as percentages,
/// max error, occlusion fraction, pixel count.
inline std::string format_report_line(const std::string& name,
                                      const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%s bad1=%.2f%% bad2=%.2f%% bad5=%.2f%% max=%.1fpx occl=%.1f%% n=%ld",
                name.c_str(), 100 * r.bad1, 100 * r.bad2, 100 * r.bad5,
                r.max_error, 100 * r.occlusion_fraction, r.evaluated_pixels);
  return buf;
}

}  // namespace pyrreg
