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

#include "pyrreg/blur.hpp"
#include "pyrreg/random.hpp"
#include "pyrreg/resample.hpp"
#include "pyrreg/warp.hpp"

namespace pyrreg {

enum class DistortionMode { smooth_field, constant_shift };
enum class Provenance { synthetic, dataset };

template <class Scalar>
struct DistortionSpec {
  Scalar max_magnitude = 0;           // ceiling on |dx|, |dy|
  Scalar continuity = Scalar(0.45);   // bound on neighbor-to-neighbor change
  Scalar smoothness_sigma = Scalar(8);
  bool stereo = false;
  DistortionMode mode = DistortionMode::smooth_field;

  void validate() const {
    require(max_magnitude >= Scalar(0), "DistortionSpec: negative magnitude");
    require(continuity > Scalar(0), "DistortionSpec: continuity must be positive");
    require(smoothness_sigma >= Scalar(0), "DistortionSpec: negative sigma");
  }
};

template <class Scalar>
struct TrainSample {
  Image<Scalar> img1;
  Image<Scalar> img2;
  DisplacementField<Scalar> truth;
  Provenance provenance = Provenance::synthetic;
};

/// Largest absolute difference between 4-neighbors, over both components.
template <class Scalar>
Scalar max_discrete_gradient(const DisplacementField<Scalar>& d) {
  const int h = d.height();
  const int w = d.width();
  Scalar g = 0;
  for (const Plane<Scalar>* p : {&d.dx, &d.dy}) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x + 1 < w; ++x)
        g = std::max(g, std::abs((*p)(y, x + 1) - (*p)(y, x)));
    for (int y = 0; y + 1 < h; ++y)
      for (int x = 0; x < w; ++x)
        g = std::max(g, std::abs((*p)(y + 1, x) - (*p)(y, x)));
  }
  return g;
}

namespace detail {

// Solves e(y) = d(y + e(y)) by fixed-point iteration; converges when the
// field's gradient bound is below one (we keep it under 1/2). With this e,
// pulling img through -e builds an img2 for which d is exactly the Eq-style
// correspondence of img1 = img.
template <class Scalar>
DisplacementField<Scalar> inverse_consistent_field(
    const DisplacementField<Scalar>& d) {
  const int h = d.height();
  const int w = d.width();
  DisplacementField<Scalar> e = d;
  DisplacementField<Scalar> next(h, w);
  for (int iter = 0; iter < 50; ++iter) {
    Scalar delta = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const Scalar sy = Scalar(y) + e.dy(y, x);
        const Scalar sx = Scalar(x) + e.dx(y, x);
        next.dx(y, x) = sample_bilinear(d.dx, sy, sx);
        next.dy(y, x) = sample_bilinear(d.dy, sy, sx);
        delta = std::max(delta, std::abs(next.dx(y, x) - e.dx(y, x)));
        delta = std::max(delta, std::abs(next.dy(y, x) - e.dy(y, x)));
      }
    }
    std::swap(e, next);
    if (delta < Scalar(1e-5)) break;
  }
  return e;
}

template <class Scalar>
Image<Scalar> warp_by_negated(const Image<Scalar>& img,
                              const DisplacementField<Scalar>& e) {
  DisplacementField<Scalar> neg(e.height(), e.width());
  neg.dx = -e.dx;
  neg.dy = -e.dy;
  return warp(img, neg);
}

}  // namespace detail

/// Builds a sample whose true correspondence is exactly the constant (dx, dy).
template <class Scalar>
TrainSample<Scalar> synth_constant_shift(const Image<Scalar>& img, Scalar dx,
                                         Scalar dy) {
  TrainSample<Scalar> s;
  s.img1 = img;
  s.truth = DisplacementField<Scalar>(img.height(), img.width());
  s.truth.dx.setConstant(dx);
  s.truth.dy.setConstant(dy);
  s.img2 = detail::warp_by_negated(img, s.truth);
  return s;
}

/// Draws a random displacement field under the spec's magnitude and
/// continuity bounds and produces the matching second view. In smooth mode:
/// white noise, blurred by smoothness_sigma, scaled so the largest component
/// hits max_magnitude, then shrunk further if the continuity bound demands
/// it (magnitude is a ceiling, not a promise). dx noise is drawn before dy;
/// stereo skips the dy draw and leaves it zero.
template <class Scalar>
TrainSample<Scalar> synth_distortion(const Image<Scalar>& img,
                                     const DistortionSpec<Scalar>& spec,
                                     Rng& rng) {
  spec.validate();
  const int h = img.height();
  const int w = img.width();
  require(h >= 1 && w >= 1 && img.channels() >= 1, "synth_distortion: empty image");

  if (spec.mode == DistortionMode::constant_shift) {
    const Scalar dx =
        spec.max_magnitude > Scalar(0)
            ? Scalar(rng.uniform(-double(spec.max_magnitude), double(spec.max_magnitude)))
            : Scalar(0);
    const Scalar dy =
        (spec.stereo || spec.max_magnitude == Scalar(0))
            ? Scalar(0)
            : Scalar(rng.uniform(-double(spec.max_magnitude), double(spec.max_magnitude)));
    return synth_constant_shift(img, dx, dy);
  }

  const int margin = static_cast<int>(std::ceil(4.0 * double(spec.smoothness_sigma)));
  require(h >= margin && w >= margin,
          "synth_distortion: image too small for smoothness_sigma");

  TrainSample<Scalar> s;
  s.img1 = img;
  s.truth = DisplacementField<Scalar>(h, w);
  if (spec.max_magnitude == Scalar(0)) {
    s.img2 = img;
    return s;
  }

  for (Plane<Scalar>* p : {&s.truth.dx, &s.truth.dy}) {
    if (p == &s.truth.dy && spec.stereo) break;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) (*p)(y, x) = Scalar(rng.normal());
    *p = gaussian_blur(*p, spec.smoothness_sigma);
  }

  const Scalar peak =
      std::max(s.truth.dx.abs().maxCoeff(), s.truth.dy.abs().maxCoeff());
  if (peak > Scalar(0)) {
    const Scalar scale = spec.max_magnitude / peak;
    s.truth.dx *= scale;
    s.truth.dy *= scale;
  }
  const Scalar grad = max_discrete_gradient(s.truth);
  if (grad >= spec.continuity) {
    const Scalar shrink = Scalar(0.98) * spec.continuity / grad;
    s.truth.dx *= shrink;
    s.truth.dy *= shrink;
  }

  const DisplacementField<Scalar> e = detail::inverse_consistent_field(s.truth);
  s.img2 = detail::warp_by_negated(img, e);
  return s;
}

template <class Scalar>
TrainSample<Scalar> synth_distortion(const Image<Scalar>& img,
                                     const DistortionSpec<Scalar>& spec,
                                     uint64_t seed) {
  Rng rng(seed);
  return synth_distortion(img, spec, rng);
}

/// Fractal test texture: unit-amplitude noise octaves from cells of
/// smallest_detail pixels up to the full frame, so every pyramid level keeps
/// usable contrast. Channels are independent; output is min-max normalized
/// to [0, 1].
template <class Scalar>
Image<Scalar> make_texture_image(int h, int w, int channels, Rng& rng,
                                 int smallest_detail = 1) {
  require(h >= 2 && w >= 2 && channels >= 1 && smallest_detail >= 1,
          "make_texture_image: bad dimensions");
  Image<Scalar> out(h, w, channels);
  const int longest = std::max(h, w);
  for (int c = 0; c < channels; ++c) {
    Plane<Scalar> acc = Plane<Scalar>::Zero(h, w);
    for (int cell = smallest_detail; cell < 2 * longest; cell *= 2) {
      const int sh = std::max(2, (h + cell - 1) / cell);
      const int sw = std::max(2, (w + cell - 1) / cell);
      Plane<Scalar> noise(sh, sw);
      for (int y = 0; y < sh; ++y)
        for (int x = 0; x < sw; ++x)
          noise(y, x) = Scalar(rng.uniform(-1.0, 1.0));
      acc += resize_bilinear(noise, h, w);
      if (sh == 2 && sw == 2) break;
    }
    const Scalar lo = acc.minCoeff();
    const Scalar hi = acc.maxCoeff();
    out[c] = hi > lo ? ((acc - lo) / (hi - lo)).eval()
                     : Plane<Scalar>::Constant(h, w, Scalar(0.5)).eval();
  }
  return out;
}

/// Horizontal mirror of a sample: both images column-reversed, dx negated
/// and column-reversed, dy column-reversed. Applying it twice is a no-op.
template <class Scalar>
TrainSample<Scalar> mirror_sample(const TrainSample<Scalar>& s) {
  TrainSample<Scalar> out;
  out.provenance = s.provenance;
  auto flip = [](const Plane<Scalar>& p) {
    return Plane<Scalar>(p.rowwise().reverse());
  };
  for (const auto& p : s.img1.planes) out.img1.planes.push_back(flip(p));
  for (const auto& p : s.img2.planes) out.img2.planes.push_back(flip(p));
  out.truth.dx = -flip(s.truth.dx);
  out.truth.dy = flip(s.truth.dy);
  return out;
}

/// Rotates RGB values around the gray axis by angle radians; a zero angle is
/// the exact identity. Non-3-channel images pass through unchanged. Results
/// are clamped back to [0, 1].
template <class Scalar>
Image<Scalar> rotate_hue(const Image<Scalar>& img, Scalar angle) {
  if (img.channels() != 3) return img;
  const Scalar c = std::cos(angle);
  const Scalar s = std::sin(angle);
  const Scalar third = Scalar(1) / Scalar(3);
  const Scalar rt3 = Scalar(std::sqrt(1.0 / 3.0));
  // Rodrigues rotation about (1,1,1)/sqrt(3).
  Scalar m[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m[i][j] = third * (Scalar(1) - c);
  for (int i = 0; i < 3; ++i) m[i][i] += c;
  m[0][1] -= rt3 * s;
  m[0][2] += rt3 * s;
  m[1][0] += rt3 * s;
  m[1][2] -= rt3 * s;
  m[2][0] -= rt3 * s;
  m[2][1] += rt3 * s;

  Image<Scalar> out(img.height(), img.width(), 3);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int i = 0; i < 3; ++i) {
        Scalar v = m[i][0] * img[0](y, x) + m[i][1] * img[1](y, x) +
                   m[i][2] * img[2](y, x);
        out[i](y, x) = std::clamp(v, Scalar(0), Scalar(1));
      }
  return out;
}

/// Random augmentation: a fair-coin horizontal mirror, then a uniform hue
/// rotation applied identically to both views (truth is hue-invariant).
template <class Scalar>
TrainSample<Scalar> augment(const TrainSample<Scalar>& s, Rng& rng) {
  TrainSample<Scalar> out = rng.uniform() < 0.5 ? mirror_sample(s) : s;
  const Scalar angle = Scalar(rng.uniform(0.0, 2.0 * 3.14159265358979323846));
  out.img1 = rotate_hue(out.img1, angle);
  out.img2 = rotate_hue(out.img2, angle);
  return out;
}

}  // namespace pyrreg
