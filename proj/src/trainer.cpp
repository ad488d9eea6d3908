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

#include <algorithm>
#include <ostream>

#include "pyrreg/trainer.hpp"

namespace pyrreg {

namespace {

TrainSample<float> crop_sample(const TrainSample<float>& s, int y0, int x0,
                               int h, int w) {
  TrainSample<float> out;
  out.provenance = s.provenance;
  for (const auto& p : s.img1.planes)
    out.img1.planes.emplace_back(p.block(y0, x0, h, w));
  for (const auto& p : s.img2.planes)
    out.img2.planes.emplace_back(p.block(y0, x0, h, w));
  out.truth.dx = s.truth.dx.block(y0, x0, h, w);
  out.truth.dy = s.truth.dy.block(y0, x0, h, w);
  return out;
}

TrainSample<float> load_scene_sample(const SceneRecord& scene) {
  TrainSample<float> s;
  s.provenance = Provenance::dataset;
  s.img1 = read_image(scene.left);
  s.img2 = read_image(scene.right);
  const Plane<float> disp = read_pfm(scene.disp_left);
  require(disp.rows() == s.img1.height() && disp.cols() == s.img1.width(),
          scene.name + ": ground truth shape mismatch");
  s.truth = DisplacementField<float>(s.img1.height(), s.img1.width());
  s.truth.dx = disp;
  return s;
}

TrainSample<float> make_synthetic(const TrainConfig& cfg,
                                  const StageParams<float>& stage, Rng& rng) {
  const int h = rng.uniform_int(stage.min_size, stage.max_size);
  const int w = rng.uniform_int(stage.min_size, stage.max_size);
  const Image<float> tex =
      make_texture_image<float>(h, w, cfg.image_channels, rng);
  DistortionSpec<float> spec;
  spec.max_magnitude = stage.max_magnitude;
  spec.continuity = cfg.hyper.continuity;
  spec.smoothness_sigma = stage.smoothness_sigma;
  spec.stereo = cfg.hyper.stereo;
  spec.mode = cfg.hyper.mode;
  return synth_distortion(tex, spec, rng);
}

}  // namespace

TrainOutcome run_training(const TrainConfig& cfg, std::ostream* metrics,
                          std::ostream* log) {
  TrainOutcome out;
  out.net = cfg.network == "stereo"
                ? make_stereo_network<float>()
                : make_compact_network<float>(2 * cfg.image_channels);
  out.meta.mu = cfg.hyper.mu;
  out.meta.stereo = cfg.hyper.stereo;

  const auto [win_h, win_w] = input_window(out.net);
  cfg.schedule.validate(win_h, win_w);

  Rng root(cfg.seed);
  Rng rng_init = root.fork(1);
  Rng rng_data = root.fork(2);
  Rng rng_drop = root.fork(3);
  init_weights(out.net, rng_init);
  AdamState<float> adam = make_adam_state(out.net);

  DatasetIndex dataset;
  std::vector<const SceneRecord*> supervised;
  if (!cfg.dataset.empty()) {
    dataset = load_dataset(cfg.dataset);
    for (const auto& w : dataset.warnings)
      if (log) *log << "dataset: " << w << "\n";
    for (const auto& s : dataset.scenes)
      if (s.supervised) supervised.push_back(&s);
    if (log)
      *log << "dataset: " << supervised.size() << " supervised scenes of "
           << dataset.scenes.size() << "\n";
  }

  long global_step = 0;
  for (size_t si = 0; si < cfg.schedule.stages.size(); ++si) {
    const auto& stage = cfg.schedule.stages[si];
    if (log)
      *log << "stage " << si << ": depth " << stage.depth << ", "
           << stage.steps << " steps\n";
    for (int step = 0; step < stage.steps; ++step) {
      TrainSample<float> sample;
      const bool use_dataset =
          !supervised.empty() && rng_data.uniform() < cfg.dataset_fraction;
      if (use_dataset) {
        const auto* scene =
            supervised[size_t(rng_data.uniform_int(int(supervised.size())))];
        TrainSample<float> full = load_scene_sample(*scene);
        const int h = std::min(full.img1.height(),
                               rng_data.uniform_int(stage.min_size, stage.max_size));
        const int w = std::min(full.img1.width(),
                               rng_data.uniform_int(stage.min_size, stage.max_size));
        const int y0 = rng_data.uniform_int(full.img1.height() - h + 1);
        const int x0 = rng_data.uniform_int(full.img1.width() - w + 1);
        sample = augment(crop_sample(full, y0, x0, h, w), rng_data);
      } else {
        sample = make_synthetic(cfg, stage, rng_data);
      }

      StepMetrics m =
          train_step(out.net, sample, stage, cfg.hyper, adam, rng_drop);
      m.step = global_step;
      m.stage = int(si);
      if (metrics)
        *metrics << "step=" << m.step << " stage=" << m.stage
                 << " loss=" << m.loss << " epe=" << m.epe
                 << " keep=" << m.mask_keep << "\n";
      if (log && 1.0 - m.mask_keep > cfg.max_masked_fraction)
        *log << "warning: step " << m.step << " masked "
             << 100.0 * (1.0 - m.mask_keep)
             << "% of its pixels; the depth may be ahead of the network\n";
      out.history.push_back(m);

      ++global_step;
      if (!cfg.checkpoint.empty() && cfg.checkpoint_interval > 0 &&
          global_step % cfg.checkpoint_interval == 0)
        save_checkpoint(out.net, out.meta, cfg.checkpoint);
    }
  }

  if (!cfg.checkpoint.empty()) save_checkpoint(out.net, out.meta, cfg.checkpoint);
  if (log) *log << "training done after " << global_step << " steps\n";
  return out;
}

}  // namespace pyrreg
