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
#include <string>
#include <vector>

#include "pyrreg/cnn.hpp"
#include "pyrreg/cnn_estimator.hpp"
#include "pyrreg/pyramid.hpp"
#include "pyrreg/synth.hpp"

namespace pyrreg {

/// One curriculum stage. Depths must be nondecreasing across stages and the
/// first stage must run at depth zero: a freshly initialized network at a
/// deeper level would feed itself misfitted coarse estimates.
template <class Scalar>
struct StageParams {
  int depth = 0;
  int steps = 0;
  int min_size = 0;
  int max_size = 0;
  double lr = 1e-3;
  Scalar max_magnitude = 0;
  Scalar smoothness_sigma = 0;
};

template <class Scalar>
struct CurriculumSchedule {
  std::vector<StageParams<Scalar>> stages;

  void validate(int min_window_h, int min_window_w) const {
    require(!stages.empty(), "CurriculumSchedule: no stages");
    require(stages.front().depth == 0, "CurriculumSchedule: stage 0 must be depth 0");
    int prev = 0;
    for (const auto& st : stages) {
      require(st.depth >= prev, "CurriculumSchedule: depths must be nondecreasing");
      require(st.steps >= 1, "CurriculumSchedule: stage needs at least one step");
      require(st.min_size >= std::max(min_window_h, min_window_w) &&
                  st.min_size <= st.max_size,
              "CurriculumSchedule: image size range below network window");
      require(st.lr > 0, "CurriculumSchedule: learning rate must be positive");
      require(st.max_magnitude >= Scalar(0), "CurriculumSchedule: negative magnitude");
      prev = st.depth;
    }
  }
};

/// Fixed training knobs shared by every stage.
template <class Scalar>
struct TrainHyper {
  Scalar mu = 4;
  Scalar continuity = Scalar(0.45);
  Scalar blur_sigma = 1;
  Scalar mask_limit = 4;
  bool stereo = true;
  DistortionMode mode = DistortionMode::smooth_field;
  AdamConfig adam;  // lr is overridden per stage
};

template <class Scalar>
struct ResidualTarget {
  DisplacementField<Scalar> target;
  Plane<Scalar> mask;  // 1 keeps the pixel, 0 drops it
  long kept = 0;
};

/// Residual the network should predict at one level: the gap between the
/// (already coarsened, already value-scaled) truth and the coarse estimate,
/// smoothed to stabilize early training. Pixels whose residual exceeds
/// mask_limit carry features the window cannot see, and sentinel (infinite)
/// truth marks holes; both are masked out. Shapes must already agree: the
/// caller owns the resampling, so a mismatch is a sequencing bug.
template <class Scalar>
ResidualTarget<Scalar> residual_target(const DisplacementField<Scalar>& truth,
                                       const DisplacementField<Scalar>& d1,
                                       Scalar blur_sigma, Scalar mask_limit) {
  if (truth.height() != d1.height() || truth.width() != d1.width())
    throw std::logic_error("residual_target: truth not resampled to d1's shape");
  const int h = d1.height();
  const int w = d1.width();

  ResidualTarget<Scalar> out;
  out.target = DisplacementField<Scalar>(h, w);
  out.target.dx = gaussian_blur<Scalar>(truth.dx - d1.dx, blur_sigma);
  out.target.dy = gaussian_blur<Scalar>(truth.dy - d1.dy, blur_sigma);
  out.mask = Plane<Scalar>::Zero(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool hole =
          !std::isfinite(truth.dx(y, x)) || !std::isfinite(truth.dy(y, x));
      const bool small = std::abs(out.target.dx(y, x)) <= mask_limit &&
                         std::abs(out.target.dy(y, x)) <= mask_limit;
      if (!hole && small) {
        out.mask(y, x) = Scalar(1);
        ++out.kept;
      }
    }
  return out;
}

/// Halves a truth field's resolution and its values: a displacement of k
/// pixels spans k/2 pixels on the coarser grid. Holes propagate to any
/// coarse pixel their block touches (infinity survives averaging).
template <class Scalar>
DisplacementField<Scalar> coarsen_truth(const DisplacementField<Scalar>& d) {
  DisplacementField<Scalar> out;
  out.dx = downsample_half(d.dx) * Scalar(0.5);
  out.dy = downsample_half(d.dy) * Scalar(0.5);
  return out;
}

template <class Scalar>
DisplacementField<Scalar> coarsen_truth(const DisplacementField<Scalar>& d,
                                        int levels) {
  DisplacementField<Scalar> out = d;
  for (int i = 0; i < levels; ++i) out = coarsen_truth(out);
  return out;
}

/// Mean distance between a field and the truth, skipping sentinel pixels.
template <class Scalar>
double mean_endpoint_error(const DisplacementField<Scalar>& pred,
                           const DisplacementField<Scalar>& truth) {
  require(pred.height() == truth.height() && pred.width() == truth.width(),
          "mean_endpoint_error: shape mismatch");
  double sum = 0;
  long n = 0;
  for (int y = 0; y < pred.height(); ++y)
    for (int x = 0; x < pred.width(); ++x) {
      if (!std::isfinite(truth.dx(y, x)) || !std::isfinite(truth.dy(y, x)))
        continue;
      const double ex = double(pred.dx(y, x)) - double(truth.dx(y, x));
      const double ey = double(pred.dy(y, x)) - double(truth.dy(y, x));
      sum += std::sqrt(ex * ex + ey * ey);
      ++n;
    }
  return n == 0 ? 0.0 : sum / double(n);
}

struct StepMetrics {
  long step = 0;
  int stage = 0;
  double loss = 0;
  double epe = 0;
  double mask_keep = 1;  // fraction of pixels that entered the loss
};

namespace detail {

template <class Scalar>
struct LevelPair {
  int depth;
  Image<Scalar> img1;
  Image<Scalar> warped2;
  DisplacementField<Scalar> d1;
};

}  // namespace detail

/// One optimization step on one sample. The recursion runs in inference mode
/// with the current weights up to the stage's depth; every level's
/// (img1, pre-warped img2, d1) triple becomes a supervised pair against its
/// residual target. Gradients flow through the network only: d1 enters the
/// loss as data. Gradients are averaged over the levels, then one Adam
/// update is applied. Samples are visited one at a time because the network
/// the recursion uses must be the freshest one available.
template <class Scalar>
StepMetrics train_step(Network<Scalar>& net, const TrainSample<Scalar>& sample,
                       const StageParams<Scalar>& stage,
                       const TrainHyper<Scalar>& hyper,
                       AdamState<Scalar>& adam, Rng& rng) {
  require(sample.img1.channels() * 2 == network_input_channels(net),
          "train_step: sample channels do not match network input");

  net.mode = NetMode::infer;
  CnnEstimator<Scalar> est(&net, hyper.mu);
  RecursionConfig cfg;
  cfg.max_depth = stage.depth;
  cfg.stereo = hyper.stereo ? StereoMode::on : StereoMode::off;

  std::vector<detail::LevelPair<Scalar>> pairs;
  LevelObserver<Scalar> observer = [&](int depth, const Image<Scalar>& a,
                                       const Image<Scalar>& b,
                                       const DisplacementField<Scalar>& d1) {
    pairs.push_back({depth, a, b, d1});
  };
  const DisplacementField<Scalar> final_field =
      register_images(sample.img1, sample.img2, est, cfg, nullptr, observer);
  require(!pairs.empty(), "train_step: sample too small for the network window");

  const auto [win_h, win_w] = input_window(net);
  const int mh = (win_h - 1) / 2;
  const int mw = (win_w - 1) / 2;

  net.mode = NetMode::train;
  Gradients<Scalar> total;
  double loss_sum = 0;
  double kept_sum = 0, pixel_sum = 0;
  bool have_grads = false;

  for (const auto& pair : pairs) {
    const DisplacementField<Scalar> truth_k =
        coarsen_truth(sample.truth, pair.depth);
    const ResidualTarget<Scalar> rt =
        residual_target(truth_k, pair.d1, hyper.blur_sigma, hyper.mask_limit);
    kept_sum += double(rt.kept);
    pixel_sum += double(rt.mask.size());

    const Image<Scalar> input = replicate_pad(
        concat_channels(pair.img1, pair.warped2), mh, mh, mw, mw);
    ForwardCache<Scalar> cache;
    const Image<Scalar> pred = forward_cached(net, input, &rng, &cache);

    const long denom = std::max<long>(1, rt.kept) *
                       (pred.channels() == 2 ? 2 : 1);
    Image<Scalar> gout(pred.height(), pred.width(), pred.channels());
    double loss = 0;
    auto accumulate = [&](int ch, const Plane<Scalar>& target) {
      for (int y = 0; y < pred.height(); ++y)
        for (int x = 0; x < pred.width(); ++x) {
          const Scalar diff = (pred[ch](y, x) - target(y, x)) * rt.mask(y, x);
          loss += double(diff) * double(diff);
          gout[ch](y, x) = Scalar(2) * diff / Scalar(denom);
        }
    };
    accumulate(0, rt.target.dx);
    if (pred.channels() == 2) accumulate(1, rt.target.dy);
    loss /= double(denom);
    loss_sum += loss;

    Gradients<Scalar> g = backward(net, cache, gout);
    if (!have_grads) {
      total = std::move(g);
      have_grads = true;
    } else {
      total.add(g);
    }
  }

  total.scale(Scalar(1) / Scalar(pairs.size()));
  AdamConfig cfg_adam = hyper.adam;
  cfg_adam.lr = stage.lr;
  adam_step(net, total, adam, cfg_adam);
  net.mode = NetMode::infer;

  StepMetrics m;
  m.loss = loss_sum / double(pairs.size());
  m.epe = mean_endpoint_error(final_field, sample.truth);
  m.mask_keep = pixel_sum > 0 ? kept_sum / pixel_sum : 1.0;
  return m;
}

/// Runs train_step over a fixed sample list (dataset-style epoch).
template <class Scalar>
std::vector<StepMetrics> train_epoch(Network<Scalar>& net,
                                     const std::vector<TrainSample<Scalar>>& samples,
                                     const StageParams<Scalar>& stage,
                                     const TrainHyper<Scalar>& hyper,
                                     AdamState<Scalar>& adam, Rng& rng) {
  require(!samples.empty(), "train_epoch: empty sample set");
  std::vector<StepMetrics> metrics;
  metrics.reserve(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    StepMetrics m = train_step(net, samples[i], stage, hyper, adam, rng);
    m.step = static_cast<long>(i);
    metrics.push_back(m);
  }
  return metrics;
}

}  // namespace pyrreg
