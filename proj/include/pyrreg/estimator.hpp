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

#include <limits>

#include "pyrreg/image.hpp"

namespace pyrreg {

enum class StereoMode { off, on };

/// Contract a single-level estimator advertises to the pyramid: it resolves
/// displacements of magnitude up to mu with error at most error_bound, on
/// images no smaller than min_height x min_width. The recursion needs
/// error_bound <= mu / 2 so that after one coarse pass the residual stays
/// inside the estimator's range.
template <class Scalar>
struct EstimatorSpec {
  Scalar mu = 0;
  Scalar error_bound = 0;
  int min_height = 1;
  int min_width = 1;

  void validate() const {
    require(mu > Scalar(0), "EstimatorSpec: mu must be positive");
    require(error_bound > Scalar(0) && error_bound <= mu / Scalar(2),
            "EstimatorSpec: error_bound must lie in (0, mu/2]");
    require(min_height >= 1 && min_width >= 1,
            "EstimatorSpec: minimum size must be at least 1");
  }
};

/// A micro-displacement estimator: given two aligned-up-to-mu views, returns
/// the residual field under the convention that a feature at x in img1 sits
/// at x - d(x) in img2. In stereo mode dy is exactly zero.
template <class Scalar>
class Estimator {
 public:
  virtual ~Estimator() = default;
  virtual const EstimatorSpec<Scalar>& spec() const = 0;
  virtual DisplacementField<Scalar> estimate(const Image<Scalar>& img1,
                                             const Image<Scalar>& img2,
                                             StereoMode mode) const = 0;
};

namespace detail {

// Box sum over (2r+1)^2 windows, valid mode: in is (h+2r) x (w+2r), out is
// h x w. Two passes, each summing taps in ascending order; tests that
// recompute costs must follow the same order to reproduce values exactly.
template <class Scalar>
Plane<Scalar> box_sum_valid(const Plane<Scalar>& in, int r) {
  const int h = static_cast<int>(in.rows()) - 2 * r;
  const int w = static_cast<int>(in.cols()) - 2 * r;
  Plane<Scalar> rows(h + 2 * r, w);
  parallel_for(0, h + 2 * r, [&](int y) {
    for (int x = 0; x < w; ++x) {
      Scalar acc = 0;
      for (int b = 0; b <= 2 * r; ++b) acc += in(y, x + b);
      rows(y, x) = acc;
    }
  });
  Plane<Scalar> out(h, w);
  parallel_for(0, h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      Scalar acc = 0;
      for (int a = 0; a <= 2 * r; ++a) acc += rows(y + a, x);
      out(y, x) = acc;
    }
  });
  return out;
}

}  // namespace detail

/// Exhaustive integer-offset matcher. For every pixel it scores each offset
/// (dy, dx) in [-mu, mu]^2 (dy fixed to 0 in stereo mode) by summed squared
/// difference over a (2*radius+1)^2 window, reading both images with
/// replicate-clamped coordinates, and keeps the offset with minimal cost.
/// Ties prefer the smaller squared magnitude, then smaller dx, then dy, so
/// the result is independent of scan order and thread count.
template <class Scalar>
DisplacementField<Scalar> block_match(const Image<Scalar>& img1,
                                      const Image<Scalar>& img2, int mu,
                                      int radius, StereoMode stereo) {
  require_same_shape(img1, img2, "block_match");
  require(mu >= 1, "block_match: mu must be at least 1");
  require(radius >= 0, "block_match: radius must be nonnegative");
  const int h = img1.height();
  const int w = img1.width();
  const int c = img1.channels();
  const int m = mu + radius;

  const Image<Scalar> e1 = replicate_pad(img1, m, m, m, m);
  const Image<Scalar> e2 = replicate_pad(img2, m, m, m, m);

  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  Plane<Scalar> best_cost = Plane<Scalar>::Constant(h, w, inf);
  Plane<int> best_mag2 = Plane<int>::Zero(h, w);
  DisplacementField<Scalar> out(h, w);

  const int dy_lo = stereo == StereoMode::on ? 0 : -mu;
  const int dy_hi = stereo == StereoMode::on ? 0 : mu;

  Plane<Scalar> diff(h + 2 * radius, w + 2 * radius);
  for (int dy = dy_lo; dy <= dy_hi; ++dy) {
    for (int dx = -mu; dx <= mu; ++dx) {
      // diff(u) over the window support [-radius, size-1+radius]: squared
      // channel distance between img1 at u and img2 at u - (dy, dx).
      parallel_for(0, h + 2 * radius, [&](int y) {
        const int y1 = y - radius + m;
        const int y2 = y1 - dy;
        for (int x = 0; x < w + 2 * radius; ++x) {
          const int x1 = x - radius + m;
          const int x2 = x1 - dx;
          Scalar acc = 0;
          for (int ch = 0; ch < c; ++ch) {
            const Scalar v = e1[ch](y1, x1) - e2[ch](y2, x2);
            acc += v * v;
          }
          diff(y, x) = acc;
        }
      });
      const Plane<Scalar> cost = detail::box_sum_valid(diff, radius);
      const int mag2 = dy * dy + dx * dx;
      parallel_for(0, h, [&](int y) {
        for (int x = 0; x < w; ++x) {
          const Scalar cn = cost(y, x);
          const Scalar cb = best_cost(y, x);
          bool better = cn < cb;
          if (!better && cn == cb) {
            const int mb = best_mag2(y, x);
            better = mag2 < mb ||
                     (mag2 == mb &&
                      (dx < out.dx(y, x) ||
                       (Scalar(dx) == out.dx(y, x) && Scalar(dy) < out.dy(y, x))));
          }
          if (better) {
            best_cost(y, x) = cn;
            best_mag2(y, x) = mag2;
            out.dx(y, x) = Scalar(dx);
            out.dy(y, x) = Scalar(dy);
          }
        }
      });
    }
  }
  return out;
}

/// Estimator wrapper around block_match. Its integer answers are off by at
/// most the rounding of the true field, so error_bound is 1/2 whenever that
/// fits the required mu / 2 ceiling.
template <class Scalar>
class BlockMatchEstimator final : public Estimator<Scalar> {
 public:
  BlockMatchEstimator(int mu, int radius) : mu_(mu), radius_(radius) {
    spec_.mu = Scalar(mu);
    spec_.error_bound = Scalar(0.5);
    spec_.min_height = 2 * radius + 1;
    spec_.min_width = 2 * radius + 1;
    spec_.validate();
  }

  const EstimatorSpec<Scalar>& spec() const override { return spec_; }

  DisplacementField<Scalar> estimate(const Image<Scalar>& img1,
                                     const Image<Scalar>& img2,
                                     StereoMode mode) const override {
    require(img1.height() >= spec_.min_height && img1.width() >= spec_.min_width,
            "BlockMatchEstimator: input below minimum size");
    return block_match(img1, img2, mu_, radius_, mode);
  }

 private:
  int mu_;
  int radius_;
  EstimatorSpec<Scalar> spec_;
};

}  // namespace pyrreg
