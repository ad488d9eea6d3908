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
#include <functional>
#include <optional>

#include "pyrreg/estimator.hpp"
#include "pyrreg/resample.hpp"
#include "pyrreg/warp.hpp"

namespace pyrreg {

struct RecursionConfig {
  /// Halvings allowed below the full-resolution level. A cap of k means the
  /// estimator runs at depths 0..k; unset means the recursion descends until
  /// the next level would not fit the minimum window.
  std::optional<int> max_depth;
  /// Extra size floor on top of the estimator's own minimum.
  int min_height = 0;
  int min_width = 0;
  StereoMode stereo = StereoMode::off;
  bool capture_trace = false;

  void validate() const {
    require(!max_depth || *max_depth >= 0, "RecursionConfig: negative depth cap");
    require(min_height >= 0 && min_width >= 0,
            "RecursionConfig: negative minimum size");
  }
};

struct FieldStats {
  double mean_abs_dx = 0, mean_abs_dy = 0;
  double max_abs_dx = 0, max_abs_dy = 0;
};

template <class Scalar>
FieldStats field_stats(const DisplacementField<Scalar>& d) {
  FieldStats s;
  s.mean_abs_dx = d.dx.abs().template cast<double>().mean();
  s.mean_abs_dy = d.dy.abs().template cast<double>().mean();
  s.max_abs_dx = d.dx.abs().maxCoeff();
  s.max_abs_dy = d.dy.abs().maxCoeff();
  return s;
}

/// One record per recursion level, ordered coarsest first. coarse holds the
/// upsampled child estimate, correction the estimator's residual.
struct LevelEntry {
  int depth = 0;
  int height = 0, width = 0;
  bool base_case = false;
  FieldStats coarse;
  FieldStats correction;
};

using LevelTrace = std::vector<LevelEntry>;

/// Hook invoked at each estimating level with the level's first image, the
/// second image pre-warped by the coarse estimate, and that estimate. The
/// training loop uses it to harvest residual pairs; it must not mutate them.
template <class Scalar>
using LevelObserver = std::function<void(
    int depth, const Image<Scalar>&, const Image<Scalar>&,
    const DisplacementField<Scalar>&)>;

namespace detail {

template <class Scalar>
DisplacementField<Scalar> register_level(const Image<Scalar>& f1,
                                         const Image<Scalar>& f2,
                                         const Estimator<Scalar>& est,
                                         const RecursionConfig& cfg, int depth,
                                         LevelTrace* trace,
                                         const LevelObserver<Scalar>& observer) {
  const int h = f1.height();
  const int w = f1.width();
  const int min_h = std::max(cfg.min_height, est.spec().min_height);
  const int min_w = std::max(cfg.min_width, est.spec().min_width);

  if (h < min_h || w < min_w) {
    if (trace) trace->push_back({depth, h, w, true, {}, {}});
    return DisplacementField<Scalar>(h, w);
  }

  DisplacementField<Scalar> d1(h, w);
  const bool may_recurse =
      (!cfg.max_depth || depth < *cfg.max_depth) && h >= 2 && w >= 2;
  if (may_recurse) {
    const DisplacementField<Scalar> child =
        register_level(downsample_half(f1), downsample_half(f2), est, cfg,
                       depth + 1, trace, observer);
    d1 = upsample_double(child, h, w);
    // One coarse pixel of displacement spans two pixels here.
    d1.dx *= Scalar(2);
    d1.dy *= Scalar(2);
  }

  const Image<Scalar> corrected = warp(f2, d1);
  if (observer) observer(depth, f1, corrected, d1);
  const DisplacementField<Scalar> d2 = est.estimate(f1, corrected, cfg.stereo);

  if (trace)
    trace->push_back({depth, h, w, false, field_stats(d1), field_stats(d2)});

  DisplacementField<Scalar> out(h, w);
  out.dx = d1.dx + d2.dx;
  out.dy = d1.dy + d2.dy;
  return out;
}

}  // namespace detail

/// Coarse-to-fine registration: estimate on the half-resolution pair, scale
/// the result up, warp the second image by it, and let the estimator fix the
/// remaining sub-mu residual. Returns the summed field; the trace (when
/// requested) records per-level statistics without changing any numbers.
template <class Scalar>
DisplacementField<Scalar> register_images(
    const Image<Scalar>& img1, const Image<Scalar>& img2,
    const Estimator<Scalar>& est, const RecursionConfig& cfg,
    LevelTrace* trace = nullptr, const LevelObserver<Scalar>& observer = {}) {
  require_same_shape(img1, img2, "register_images");
  cfg.validate();
  return detail::register_level(img1, img2, est, cfg, 0, trace, observer);
}

/// Largest displacement magnitude the configuration can recover: mu doubles
/// with every level the recursion can execute on the given input size.
template <class Scalar>
Scalar effective_range(const RecursionConfig& cfg,
                       const EstimatorSpec<Scalar>& spec, int height,
                       int width) {
  cfg.validate();
  const int min_h = std::max(cfg.min_height, spec.min_height);
  const int min_w = std::max(cfg.min_width, spec.min_width);
  int depth = 0;
  int h = height, w = width;
  while ((!cfg.max_depth || depth < *cfg.max_depth) && h >= 2 && w >= 2) {
    const int ch = (h + 1) / 2;
    const int cw = (w + 1) / 2;
    if (ch < min_h || cw < min_w) break;
    h = ch;
    w = cw;
    ++depth;
  }
  return spec.mu * Scalar(std::ldexp(1.0, depth));
}

}  // namespace pyrreg
