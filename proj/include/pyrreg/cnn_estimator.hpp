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

#include "pyrreg/cnn.hpp"
#include "pyrreg/estimator.hpp"

namespace pyrreg {

/// Fully-convolutional sliding-window inference at the input's resolution:
/// pads by the receptive-field margins with border replication, then runs
/// the network over horizontal bands so memory stays bounded on large
/// frames. Output spatial size equals the input's.
template <class Scalar>
Image<Scalar> cnn_forward_padded(const Network<Scalar>& net,
                                 const Image<Scalar>& input) {
  const auto [win_h, win_w] = input_window(net);
  require(win_h % 2 == 1 && win_w % 2 == 1,
          "cnn_forward_padded: window must be odd in both dimensions");
  const int mh = (win_h - 1) / 2;
  const int mw = (win_w - 1) / 2;
  const Image<Scalar> padded = replicate_pad(input, mh, mh, mw, mw);

  const int h = input.height();
  const int w = input.width();
  int out_channels = 0;
  for (const auto& item : net.items)
    if (const auto* conv = std::get_if<ConvLayer<Scalar>>(&item))
      out_channels = conv->cout;
  Image<Scalar> out(h, w, out_channels);

  constexpr int kBandRows = 64;
  for (int r0 = 0; r0 < h; r0 += kBandRows) {
    const int r1 = std::min(h, r0 + kBandRows);
    // Output rows [r0, r1) need padded rows [r0, r1 + win_h - 1).
    Image<Scalar> band(r1 - r0 + win_h - 1, padded.width(), padded.channels());
    for (int c = 0; c < padded.channels(); ++c)
      band[c] = padded[c].block(r0, 0, r1 - r0 + win_h - 1, padded.width());
    const Image<Scalar> res = forward(net, band);
    for (int c = 0; c < out_channels; ++c)
      out[c].block(r0, 0, r1 - r0, w) = res[c];
  }
  return out;
}

/// Registers two images with the network: channels are concatenated, the
/// forward pass predicts the residual per pixel, and components are clamped
/// to [-mu, mu] to honor the estimator contract. A one-channel network is
/// the stereo case (dx only); a two-channel network predicts (dx, dy).
template <class Scalar>
DisplacementField<Scalar> cnn_estimate(const Network<Scalar>& net,
                                       const Image<Scalar>& img1,
                                       const Image<Scalar>& img2, Scalar mu,
                                       StereoMode mode) {
  require_same_shape(img1, img2, "cnn_estimate");
  require(img1.channels() + img2.channels() == network_input_channels(net),
          "cnn_estimate: channel count does not match network input");
  const Image<Scalar> stacked = concat_channels(img1, img2);
  const Image<Scalar> res = cnn_forward_padded(net, stacked);

  DisplacementField<Scalar> d(img1.height(), img1.width());
  if (mode == StereoMode::on) {
    require(res.channels() >= 1, "cnn_estimate: network has no output channel");
    d.dx = res[0].min(mu).max(-mu);
  } else {
    require(res.channels() == 2,
            "cnn_estimate: 2D mode needs a two-channel network");
    d.dx = res[0].min(mu).max(-mu);
    d.dy = res[1].min(mu).max(-mu);
  }
  return d;
}

/// Estimator facade over a frozen network. The network must be in inference
/// mode: running dropout inside the registration recursion would be an
/// internal sequencing bug, not a caller error.
template <class Scalar>
class CnnEstimator final : public Estimator<Scalar> {
 public:
  CnnEstimator(const Network<Scalar>* net, Scalar mu) : net_(net) {
    require(net != nullptr, "CnnEstimator: null network");
    const auto [win_h, win_w] = input_window(*net);
    spec_.mu = mu;
    spec_.error_bound = mu / Scalar(2);
    spec_.min_height = win_h;
    spec_.min_width = win_w;
    spec_.validate();
  }

  const EstimatorSpec<Scalar>& spec() const override { return spec_; }

  DisplacementField<Scalar> estimate(const Image<Scalar>& img1,
                                     const Image<Scalar>& img2,
                                     StereoMode mode) const override {
    if (net_->mode != NetMode::infer)
      throw std::logic_error("CnnEstimator: network left in train mode");
    require(img1.height() >= spec_.min_height && img1.width() >= spec_.min_width,
            "CnnEstimator: input below the network window");
    return cnn_estimate(*net_, img1, img2, spec_.mu, mode);
  }

 private:
  const Network<Scalar>* net_;
  EstimatorSpec<Scalar> spec_;
};

}  // namespace pyrreg
