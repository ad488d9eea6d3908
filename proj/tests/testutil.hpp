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

// Reference implementations used as test oracles. Everything here is written
// as plain scalar loops, independent of the library's vectorized or
// parallelized code paths, so agreement between the two is meaningful.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "pyrreg/cnn.hpp"
#include "pyrreg/estimator.hpp"
#include "pyrreg/image.hpp"
#include "pyrreg/random.hpp"
#include "pyrreg/resample.hpp"

namespace testutil {

using pyrreg::DisplacementField;
using pyrreg::Image;
using pyrreg::Plane;

template <class Scalar>
Image<Scalar> noise_image(pyrreg::Rng& rng, int h, int w, int c) {
  Image<Scalar> img(h, w, c);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img[ch](y, x) = Scalar(rng.uniform());
  return img;
}

/// img(y, x) shifted so the output at (y, x) shows img(y + sy, x + sx),
/// clamped at the border. With truth d = (sx, sy) this is exactly
/// warp(img, -d), i.e. the second view of a constant-shift pair.
template <class Scalar>
Image<Scalar> shift_image(const Image<Scalar>& img, int sx, int sy) {
  Image<Scalar> out(img.height(), img.width(), img.channels());
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) {
        const int yy = std::clamp(y + sy, 0, img.height() - 1);
        const int xx = std::clamp(x + sx, 0, img.width() - 1);
        out[c](y, x) = img[c](yy, xx);
      }
  return out;
}

template <class Scalar>
Plane<Scalar> naive_downsample_half(const Plane<Scalar>& p) {
  const int h = static_cast<int>(p.rows());
  const int w = static_cast<int>(p.cols());
  const int oh = (h + 1) / 2;
  const int ow = (w + 1) / 2;
  Plane<Scalar> out(oh, ow);
  auto at = [&](int y, int x) {
    return p(std::min(y, h - 1), std::min(x, w - 1));
  };
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      out(y, x) = (at(2 * y, 2 * x) + at(2 * y, 2 * x + 1) +
                   at(2 * y + 1, 2 * x) + at(2 * y + 1, 2 * x + 1)) /
                  Scalar(4);
  return out;
}

template <class Scalar>
Scalar naive_bilinear(const Plane<Scalar>& p, double y, double x) {
  const int h = static_cast<int>(p.rows());
  const int w = static_cast<int>(p.cols());
  y = std::clamp(y, 0.0, double(h - 1));
  x = std::clamp(x, 0.0, double(w - 1));
  const int y0 = std::min(int(std::floor(y)), h - 1);
  const int x0 = std::min(int(std::floor(x)), w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const double fy = y - y0;
  const double fx = x - x0;
  const double v = (1 - fy) * ((1 - fx) * p(y0, x0) + fx * p(y0, x1)) +
                   fy * ((1 - fx) * p(y1, x0) + fx * p(y1, x1));
  return Scalar(v);
}

template <class Scalar>
Image<Scalar> naive_warp(const Image<Scalar>& img,
                         const DisplacementField<Scalar>& d) {
  Image<Scalar> out(img.height(), img.width(), img.channels());
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        out[c](y, x) = naive_bilinear(img[c], double(y) - double(d.dy(y, x)),
                                      double(x) - double(d.dx(y, x)));
  return out;
}

/// Exhaustive per-pixel matcher in double precision with the documented
/// tie-break: lexicographic minimum of (cost, dy*dy + dx*dx, dx, dy).
template <class Scalar>
DisplacementField<Scalar> naive_block_match(const Image<Scalar>& img1,
                                            const Image<Scalar>& img2, int mu,
                                            int radius, bool stereo) {
  const int h = img1.height();
  const int w = img1.width();
  DisplacementField<Scalar> out(h, w);
  auto at = [&](const Image<Scalar>& img, int c, int y, int x) {
    return double(img[c](std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1)));
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double best = std::numeric_limits<double>::infinity();
      int best_mag2 = 0, best_dx = 0, best_dy = 0;
      const int dy_lim = stereo ? 0 : mu;
      for (int dy = -dy_lim; dy <= dy_lim; ++dy)
        for (int dx = -mu; dx <= mu; ++dx) {
          double cost = 0;
          for (int ay = -radius; ay <= radius; ++ay)
            for (int ax = -radius; ax <= radius; ++ax)
              for (int c = 0; c < img1.channels(); ++c) {
                const double v = at(img1, c, y + ay, x + ax) -
                                 at(img2, c, y + ay - dy, x + ax - dx);
                cost += v * v;
              }
          const int mag2 = dy * dy + dx * dx;
          const bool better =
              cost < best ||
              (cost == best &&
               (mag2 < best_mag2 ||
                (mag2 == best_mag2 &&
                 (dx < best_dx || (dx == best_dx && dy < best_dy)))));
          if (better) {
            best = cost;
            best_mag2 = mag2;
            best_dx = dx;
            best_dy = dy;
          }
        }
      out.dx(y, x) = Scalar(best_dx);
      out.dy(y, x) = Scalar(best_dy);
    }
  return out;
}

/// Seven-loop valid convolution, no cleverness.
template <class Scalar>
Image<Scalar> naive_conv(const pyrreg::ConvLayer<Scalar>& layer,
                         const Image<Scalar>& in) {
  const int oh = in.height() - layer.kh + 1;
  const int ow = in.width() - layer.kw + 1;
  Image<Scalar> out(oh, ow, layer.cout);
  for (int co = 0; co < layer.cout; ++co)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = double(layer.bias(co));
        for (int ci = 0; ci < layer.cin; ++ci)
          for (int ky = 0; ky < layer.kh; ++ky)
            for (int kx = 0; kx < layer.kw; ++kx)
              acc += double(in[ci](y + ky, x + kx)) *
                     double(layer.weights(layer.weight_row(ky, kx, ci), co));
        if (layer.act == pyrreg::Activation::relu) acc = std::max(acc, 0.0);
        out[co](y, x) = Scalar(acc);
      }
  return out;
}

/// Maximum of |a - b| over all planes of two fields.
template <class Scalar>
double max_field_diff(const DisplacementField<Scalar>& a,
                      const DisplacementField<Scalar>& b) {
  double m = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      m = std::max(m, std::abs(double(a.dx(y, x)) - double(b.dx(y, x))));
      m = std::max(m, std::abs(double(a.dy(y, x)) - double(b.dy(y, x))));
    }
  return m;
}

template <class Scalar>
double max_image_diff(const Image<Scalar>& a, const Image<Scalar>& b) {
  double m = 0;
  for (int c = 0; c < a.channels(); ++c)
    for (int y = 0; y < a.height(); ++y)
      for (int x = 0; x < a.width(); ++x)
        m = std::max(m, std::abs(double(a[c](y, x)) - double(b[c](y, x))));
  return m;
}

/// Error of pred against a constant shift (sx, sy), averaged over pixels at
/// least margin away from every border.
template <class Scalar>
double mean_interior_error(const DisplacementField<Scalar>& pred, double sx,
                           double sy, int margin) {
  double sum = 0;
  long n = 0;
  for (int y = margin; y < pred.height() - margin; ++y)
    for (int x = margin; x < pred.width() - margin; ++x) {
      const double ex = double(pred.dx(y, x)) - sx;
      const double ey = double(pred.dy(y, x)) - sy;
      sum += std::sqrt(ex * ex + ey * ey);
      ++n;
    }
  return n == 0 ? 0.0 : sum / double(n);
}

/// All mutable scalars of a network, flattened for finite-difference probes.
template <class Scalar>
std::vector<Scalar*> parameter_pointers(pyrreg::Network<Scalar>& net) {
  std::vector<Scalar*> ptrs;
  for (auto& item : net.items) {
    auto* conv = std::get_if<pyrreg::ConvLayer<Scalar>>(&item);
    if (!conv) continue;
    for (Eigen::Index i = 0; i < conv->weights.size(); ++i)
      ptrs.push_back(conv->weights.data() + i);
    for (Eigen::Index i = 0; i < conv->bias.size(); ++i)
      ptrs.push_back(conv->bias.data() + i);
  }
  return ptrs;
}

/// Gradient pointers in the same order as parameter_pointers.
template <class Scalar>
std::vector<const Scalar*> gradient_pointers(
    const pyrreg::Network<Scalar>& net, const pyrreg::Gradients<Scalar>& g) {
  std::vector<const Scalar*> ptrs;
  for (size_t i = 0; i < net.items.size(); ++i) {
    if (!std::holds_alternative<pyrreg::ConvLayer<Scalar>>(net.items[i]))
      continue;
    const auto& lg = g.items[i];
    for (Eigen::Index k = 0; k < lg.weights.size(); ++k)
      ptrs.push_back(lg.weights.data() + k);
    for (Eigen::Index k = 0; k < lg.bias.size(); ++k)
      ptrs.push_back(lg.bias.data() + k);
  }
  return ptrs;
}

struct GradCheckResult {
  double max_rel_error = 0;
  int checked = 0;
};

/// Central-difference check of backward() on loss = sum(G .* forward(input))
/// for a fixed random G. Samples up to max_params parameters uniformly.
/// rel = |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline GradCheckResult gradient_check(pyrreg::Network<double>& net,
                                      const Image<double>& input,
                                      pyrreg::Rng& rng, int max_params,
                                      double step = 1e-3,
                                      double floor = 1e-4) {
  using pyrreg::ForwardCache;
  using pyrreg::Gradients;

  // Dropout layers in these checks always use rate 0, so train mode is
  // deterministic and the surviving-mask multiply still gets exercised.
  pyrreg::Rng dropout_rng(0);
  ForwardCache<double> cache;
  const Image<double> out = forward_cached(net, input, &dropout_rng, &cache);

  Image<double> G(out.height(), out.width(), out.channels());
  for (int c = 0; c < out.channels(); ++c)
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x)
        G[c](y, x) = rng.uniform(-1.0, 1.0);

  auto loss = [&]() {
    const Image<double> o = pyrreg::forward(net, input, &dropout_rng);
    double s = 0;
    for (int c = 0; c < o.channels(); ++c)
      for (int y = 0; y < o.height(); ++y)
        for (int x = 0; x < o.width(); ++x) s += G[c](y, x) * o[c](y, x);
    return s;
  };

  const Gradients<double> grads = pyrreg::backward(net, cache, G);
  auto params = parameter_pointers(net);
  auto grad_ptrs = gradient_pointers(net, grads);

  GradCheckResult res;
  const int total = static_cast<int>(params.size());
  const int n = std::min(max_params, total);
  for (int i = 0; i < n; ++i) {
    const int idx = n == total ? i : rng.uniform_int(total);
    double* p = params[size_t(idx)];
    const double saved = *p;
    *p = saved + step;
    const double up = loss();
    *p = saved - step;
    const double down = loss();
    *p = saved;
    const double numeric = (up - down) / (2 * step);
    const double analytic = double(*grad_ptrs[size_t(idx)]);
    const double rel = std::abs(analytic - numeric) /
                       std::max({std::abs(analytic), std::abs(numeric), floor});
    res.max_rel_error = std::max(res.max_rel_error, rel);
    ++res.checked;
  }
  return res;
}

/// A small random network whose layer shapes themselves are randomized.
/// Kernels stay small so the required input window stays tiny.
inline pyrreg::Network<double> random_tiny_network(pyrreg::Rng& rng,
                                                   int in_channels,
                                                   bool with_dropout = false) {
  using pyrreg::Activation;
  using pyrreg::ConvLayer;
  using pyrreg::DropoutLayer;
  pyrreg::Network<double> net;
  int c = in_channels;
  const int layers = 2 + rng.uniform_int(2);  // 2 or 3 conv layers
  for (int i = 0; i < layers; ++i) {
    const int kh = 1 + rng.uniform_int(3);
    const int kw = 1 + rng.uniform_int(3);
    const int co = 2 + rng.uniform_int(5);
    const bool last = i == layers - 1;
    net.items.emplace_back(ConvLayer<double>(
        kh, kw, c, co, last ? Activation::linear : Activation::relu));
    if (with_dropout && !last && rng.uniform() < 0.5)
      net.items.emplace_back(DropoutLayer<double>(0.0));
    c = co;
  }
  pyrreg::init_weights(net, rng);
  // init_weights zeroes biases, so a patch the preceding relu killed would
  // produce a pre-activation of exactly zero, right on the kink where the
  // subgradient and finite differences disagree. Nudge every bias off zero.
  for (auto& item : net.items) {
    auto* conv = std::get_if<pyrreg::ConvLayer<double>>(&item);
    if (!conv) continue;
    for (int co = 0; co < conv->cout; ++co) {
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      conv->bias(co) = sign * rng.uniform(0.05, 0.25);
    }
  }
  return net;
}

/// Smallest |pre-activation| across every relu layer in one forward pass.
/// Finite-difference probes must stay on a single linear piece of each
/// activation, so gradient checks want this comfortably above the step size.
inline double relu_kink_margin(const pyrreg::Network<double>& net,
                               const Image<double>& input) {
  pyrreg::Rng dropout_rng(0);
  pyrreg::ForwardCache<double> cache;
  pyrreg::forward_cached(net, input, &dropout_rng, &cache);
  double margin = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < net.items.size(); ++i) {
    const auto* conv = std::get_if<pyrreg::ConvLayer<double>>(&net.items[i]);
    if (!conv || conv->act != pyrreg::Activation::relu) continue;
    const auto& cc = std::get<pyrreg::ConvCache<double>>(cache.items[i]);
    if (cc.pre.size() > 0)
      margin = std::min(margin, double(cc.pre.array().abs().minCoeff()));
  }
  return margin;
}

/// Noise input for gradient checks, redrawn until no relu pre-activation
/// sits within `margin` of its kink.
inline Image<double> kink_safe_noise_input(const pyrreg::Network<double>& net,
                                           pyrreg::Rng& rng, int pad,
                                           double margin = 1e-2) {
  const auto [win_h, win_w] = pyrreg::input_window(net);
  const int channels = pyrreg::network_input_channels(net);
  for (;;) {
    Image<double> in =
        noise_image<double>(rng, win_h + pad, win_w + pad, channels);
    if (relu_kink_margin(net, in) > margin) return in;
  }
}

/// Estimator stand-in that answers from the ground-truth field instead of
/// the images. It keeps the recursion's own coarse bookkeeping in lockstep
/// (same halving sizes, same upsample, same times-two), so at every level it
/// knows the residual it is being asked for and returns it rounded to whole
/// pixels and clamped to [-mu, mu]. Rounding keeps its error at 1/2 px as
/// long as the recursion holds residuals inside the estimator's range, which
/// is exactly the property the bound tests probe: any slip in the coarse
/// composition drives a residual past mu, the clamp bites, and the final
/// error blows up.
template <class Scalar>
class QuantizingOracle final : public pyrreg::Estimator<Scalar> {
 public:
  QuantizingOracle(const pyrreg::DisplacementField<Scalar>& truth, Scalar mu,
                   int min_size = 4) {
    spec_.mu = mu;
    spec_.error_bound = Scalar(0.5);
    spec_.min_height = min_size;
    spec_.min_width = min_size;
    spec_.validate();
    // Level k of the pyramid sees the truth halved k times, in that level's
    // pixel units.
    levels_.push_back(truth);
    while (levels_.back().height() >= 2 && levels_.back().width() >= 2) {
      const auto& prev = levels_.back();
      pyrreg::DisplacementField<Scalar> next;
      next.dx = pyrreg::downsample_half(prev.dx) * Scalar(0.5);
      next.dy = pyrreg::downsample_half(prev.dy) * Scalar(0.5);
      levels_.push_back(std::move(next));
    }
  }

  const pyrreg::EstimatorSpec<Scalar>& spec() const override { return spec_; }

  pyrreg::DisplacementField<Scalar> estimate(
      const Image<Scalar>& img1, const Image<Scalar>&,
      pyrreg::StereoMode mode) const override {
    const int h = img1.height();
    const int w = img1.width();
    size_t level = levels_.size();
    for (size_t k = 0; k < levels_.size(); ++k)
      if (levels_[k].height() == h && levels_[k].width() == w) {
        level = k;
        break;
      }
    pyrreg::require(level < levels_.size(),
                    "QuantizingOracle: unexpected level size");

    // The coarse field this level was warped by: zero at the coarsest
    // estimating level, otherwise our previous answer upsampled and doubled
    // the same way the recursion composes it. Calls arrive coarsest first,
    // so a size mismatch with the next-coarser level means a fresh run.
    pyrreg::DisplacementField<Scalar> d1(h, w);
    if (level + 1 < levels_.size() &&
        last_total_.height() == levels_[level + 1].height() &&
        last_total_.width() == levels_[level + 1].width()) {
      d1 = pyrreg::upsample_double(last_total_, h, w);
      d1.dx *= Scalar(2);
      d1.dy *= Scalar(2);
    }

    const auto& truth = levels_[level];
    pyrreg::DisplacementField<Scalar> q(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        q.dx(y, x) = std::clamp(std::round(truth.dx(y, x) - d1.dx(y, x)),
                                -spec_.mu, spec_.mu);
        if (mode == pyrreg::StereoMode::off)
          q.dy(y, x) = std::clamp(std::round(truth.dy(y, x) - d1.dy(y, x)),
                                  -spec_.mu, spec_.mu);
      }

    last_total_ = pyrreg::DisplacementField<Scalar>(h, w);
    last_total_.dx = d1.dx + q.dx;
    last_total_.dy = d1.dy + q.dy;
    return q;
  }

 private:
  pyrreg::EstimatorSpec<Scalar> spec_;
  std::vector<pyrreg::DisplacementField<Scalar>> levels_;
  mutable pyrreg::DisplacementField<Scalar> last_total_;
};

}  // namespace testutil
