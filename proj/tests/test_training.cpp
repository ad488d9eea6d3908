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

#include <doctest.h>

#include <cmath>
#include <limits>

#include "pyrreg/estimator.hpp"
#include "pyrreg/train.hpp"
#include "pyrreg/trainer.hpp"
#include "testutil.hpp"

using namespace pyrreg;

TEST_SUITE_BEGIN("training");

namespace {

Image<float> texture(int h, int w, int c, uint64_t seed) {
  Rng rng(seed);
  return make_texture_image<float>(h, w, c, rng);
}

}  // namespace

TEST_CASE("zero magnitude distortion returns the input untouched") {
  const Image<float> img = texture(64, 64, 1, 401);
  DistortionSpec<float> spec;
  spec.max_magnitude = 0;
  spec.smoothness_sigma = 8;
  Rng rng(402);
  const TrainSample<float> s = synth_distortion(img, spec, rng);
  CHECK(testutil::max_image_diff(s.img1, img) == 0.0);
  CHECK(testutil::max_image_diff(s.img2, img) == 0.0);
  CHECK((s.truth.dx == 0.0f).all());
  CHECK((s.truth.dy == 0.0f).all());
}

TEST_CASE("constant shift samples carry their shift as ground truth") {
  const Image<float> img = texture(48, 48, 1, 403);
  const TrainSample<float> s = synth_constant_shift(img, 3.0f, 0.0f);
  CHECK((s.truth.dx == 3.0f).all());
  CHECK((s.truth.dy == 0.0f).all());
  // Warping the second view by the truth must reproduce the first view
  // wherever the truth does not reach past the border.
  const Image<float> back = warp(s.img2, s.truth);
  double max_err = 0;
  for (int y = 4; y < 44; ++y)
    for (int x = 4; x < 44; ++x)
      max_err = std::max(max_err, std::abs(double(back[0](y, x)) -
                                           double(s.img1[0](y, x))));
  CHECK(max_err < 1e-3);
}

TEST_CASE("smooth distortions honor the magnitude and continuity bounds") {
  const Image<float> img = texture(64, 64, 1, 405);
  DistortionSpec<float> spec;
  spec.max_magnitude = 4;
  spec.smoothness_sigma = 8;
  spec.continuity = 0.45f;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    const TrainSample<float> s = synth_distortion(img, spec, seed);
    CAPTURE(seed);
    CHECK(s.truth.dx.abs().maxCoeff() <= 4.0f + 1e-5f);
    CHECK(s.truth.dy.abs().maxCoeff() <= 4.0f + 1e-5f);
    CHECK(max_discrete_gradient(s.truth) < 0.5f);
  }
}

TEST_CASE("stereo distortions keep dy identically zero") {
  const Image<float> img = texture(64, 64, 1, 407);
  DistortionSpec<float> spec;
  spec.max_magnitude = 4;
  spec.smoothness_sigma = 8;
  spec.stereo = true;
  const TrainSample<float> s = synth_distortion(img, spec, uint64_t(408));
  CHECK((s.truth.dy == 0.0f).all());
  CHECK(s.truth.dx.abs().maxCoeff() > 0.0f);
}

TEST_CASE("smooth samples close the loop: warping img2 by truth gives img1") {
  // A smooth plaid keeps the bilinear interpolation residue tiny, so any
  // sign or anchoring slip in the generated pair (which misplaces content by
  // up to 2 |d| pixels) stands out by almost an order of magnitude.
  Image<float> img(96, 96, 1);
  for (int y = 0; y < 96; ++y)
    for (int x = 0; x < 96; ++x)
      img[0](y, x) = 0.5f + 0.25f * std::sin(2.0f * 3.14159265f * x / 7.3f) +
                     0.25f * std::sin(2.0f * 3.14159265f * y / 9.1f);
  DistortionSpec<float> spec;
  spec.max_magnitude = 5;
  spec.smoothness_sigma = 12;
  const TrainSample<float> s = synth_distortion(img, spec, uint64_t(410));

  auto interior_max = [&](const DisplacementField<float>& f) {
    const Image<float> back = warp(s.img2, f);
    double max_err = 0;
    for (int y = 8; y < 88; ++y)
      for (int x = 8; x < 88; ++x)
        max_err = std::max(max_err, std::abs(double(back[0](y, x)) -
                                             double(s.img1[0](y, x))));
    return max_err;
  };

  CHECK(interior_max(s.truth) < 0.12);

  DisplacementField<float> flipped(96, 96);
  flipped.dx = -s.truth.dx;
  flipped.dy = -s.truth.dy;
  CHECK(interior_max(flipped) > 0.3);
}

TEST_CASE("residual target is zero with full mask when d1 equals truth") {
  DisplacementField<float> truth(12, 12);
  truth.dx.setConstant(1.5f);
  truth.dy.setConstant(-0.5f);
  const ResidualTarget<float> rt = residual_target(truth, truth, 1.0f, 4.0f);
  CHECK(rt.target.dx.abs().maxCoeff() < 1e-6f);
  CHECK(rt.target.dy.abs().maxCoeff() < 1e-6f);
  CHECK((rt.mask == 1.0f).all());
  CHECK(rt.kept == 144);
}

TEST_CASE("residuals beyond the mask limit are dropped entirely") {
  DisplacementField<float> truth(10, 10);
  truth.dx.setConstant(10.0f);
  const DisplacementField<float> d1(10, 10);  // zero estimate
  const ResidualTarget<float> rt = residual_target(truth, d1, 1.0f, 4.0f);
  CHECK((rt.mask == 0.0f).all());
  CHECK(rt.kept == 0);
}

TEST_CASE("sentinel truth pixels are masked out as holes") {
  DisplacementField<float> truth(8, 8);
  truth.dx.setConstant(1.0f);
  truth.dx(3, 4) = std::numeric_limits<float>::infinity();
  const DisplacementField<float> d1(8, 8);
  // blur_sigma 0 keeps the sentinel from spreading into neighbors here.
  const ResidualTarget<float> rt = residual_target(truth, d1, 0.0f, 4.0f);
  CHECK(rt.mask(3, 4) == 0.0f);
  CHECK(rt.mask(3, 3) == 1.0f);
  CHECK(rt.mask(2, 4) == 1.0f);
  CHECK(rt.kept == 63);
}

TEST_CASE("at depth zero with a zero estimate the target is the blurred truth") {
  Rng rng(411);
  DisplacementField<float> truth(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      truth.dx(y, x) = float(rng.uniform(-2.0, 2.0));
      truth.dy(y, x) = float(rng.uniform(-2.0, 2.0));
    }
  const DisplacementField<float> d1(16, 16);
  const ResidualTarget<float> rt = residual_target(truth, d1, 1.0f, 4.0f);
  const Plane<float> want_dx = gaussian_blur(truth.dx, 1.0f);
  const Plane<float> want_dy = gaussian_blur(truth.dy, 1.0f);
  CHECK((rt.target.dx - want_dx).abs().maxCoeff() < 1e-6f);
  CHECK((rt.target.dy - want_dy).abs().maxCoeff() < 1e-6f);
}

TEST_CASE("residual target rejects mismatched shapes") {
  DisplacementField<float> truth(8, 8);
  DisplacementField<float> d1(4, 4);
  CHECK_THROWS_AS(residual_target(truth, d1, 1.0f, 4.0f), std::logic_error);
}

TEST_CASE("coarsening truth halves both the grid and the values") {
  DisplacementField<float> d(8, 8);
  d.dx.setConstant(6.0f);
  d.dy.setConstant(-2.0f);
  const DisplacementField<float> c = coarsen_truth(d);
  CHECK(c.height() == 4);
  CHECK(c.width() == 4);
  CHECK((c.dx == 3.0f).all());
  CHECK((c.dy == -1.0f).all());

  const DisplacementField<float> cc = coarsen_truth(d, 2);
  CHECK(cc.height() == 2);
  CHECK((cc.dx == 1.5f).all());
}

TEST_CASE("holes survive coarsening") {
  DisplacementField<float> d(8, 8);
  d.dx.setConstant(2.0f);
  d.dx(2, 2) = std::numeric_limits<float>::infinity();
  const DisplacementField<float> c = coarsen_truth(d);
  CHECK(!std::isfinite(c.dx(1, 1)));
  CHECK(std::isfinite(c.dx(0, 0)));
  CHECK(std::isfinite(c.dx(3, 3)));
}

TEST_CASE("mirroring twice is the identity") {
  const Image<float> img = texture(20, 24, 3, 413);
  DistortionSpec<float> spec;
  spec.max_magnitude = 2;
  spec.smoothness_sigma = 4;
  const TrainSample<float> s = synth_distortion(img, spec, uint64_t(414));
  const TrainSample<float> back = mirror_sample(mirror_sample(s));
  CHECK(testutil::max_image_diff(back.img1, s.img1) == 0.0);
  CHECK(testutil::max_image_diff(back.img2, s.img2) == 0.0);
  CHECK(testutil::max_field_diff(back.truth, s.truth) == 0.0);
}

TEST_CASE("a zero hue rotation is the exact identity") {
  const Image<float> img = texture(16, 16, 3, 415);
  const Image<float> out = rotate_hue(img, 0.0f);
  CHECK(testutil::max_image_diff(out, img) == 0.0);
}

TEST_CASE("hue rotation passes single-channel images through") {
  const Image<float> img = texture(16, 16, 1, 416);
  const Image<float> out = rotate_hue(img, 1.0f);
  CHECK(testutil::max_image_diff(out, img) == 0.0);
}

TEST_CASE("mirroring a constant shift negates it, and the oracle agrees") {
  const Image<float> img = texture(40, 40, 1, 417);
  const TrainSample<float> s = synth_constant_shift(img, 2.0f, 0.0f);
  const TrainSample<float> m = mirror_sample(s);
  CHECK((m.truth.dx == -2.0f).all());

  BlockMatchEstimator<float> est(3, 3);
  const DisplacementField<float> d = est.estimate(m.img1, m.img2, StereoMode::on);
  CHECK(testutil::mean_interior_error(d, -2.0, 0.0, 6) < 0.25);
}

TEST_CASE("a fully masked step leaves the weights untouched") {
  Rng rng(419);
  Network<float> net = make_compact_network<float>(2);
  init_weights(net, rng);
  const std::vector<float*> before_ptrs = testutil::parameter_pointers(net);
  std::vector<float> before;
  for (const float* p : before_ptrs) before.push_back(*p);

  const Image<float> img = texture(24, 24, 1, 420);
  // Truth 3 px with mask_limit 0: every pixel's residual exceeds the limit.
  const TrainSample<float> sample = synth_constant_shift(img, 3.0f, 0.0f);
  StageParams<float> stage;
  stage.depth = 0;
  stage.steps = 1;
  stage.min_size = 24;
  stage.max_size = 24;
  stage.lr = 1e-2;
  stage.max_magnitude = 3;
  TrainHyper<float> hyper;
  hyper.mask_limit = 0;
  AdamState<float> adam = make_adam_state(net);
  const StepMetrics m = train_step(net, sample, stage, hyper, adam, rng);
  CHECK(m.mask_keep == 0.0);

  const std::vector<float*> after_ptrs = testutil::parameter_pointers(net);
  bool identical = true;
  for (size_t i = 0; i < after_ptrs.size(); ++i)
    identical = identical && (*after_ptrs[i] == before[i]);
  CHECK(identical);
}

TEST_CASE("a zero network at depth zero reports the analytic loss") {
  Rng rng(421);
  Network<float> net = make_compact_network<float>(2);  // weights all zero
  const Image<float> img = texture(24, 24, 1, 422);
  const TrainSample<float> sample = synth_constant_shift(img, 2.0f, 0.0f);
  StageParams<float> stage;
  stage.depth = 0;
  stage.steps = 1;
  stage.min_size = 24;
  stage.max_size = 24;
  stage.lr = 1e-3;
  stage.max_magnitude = 2;
  TrainHyper<float> hyper;  // mask_limit 4 keeps every pixel
  AdamState<float> adam = make_adam_state(net);
  const StepMetrics m = train_step(net, sample, stage, hyper, adam, rng);
  // Prediction is identically zero, target is the blurred constant 2, so the
  // masked mean square error is 4 and the endpoint error is 2.
  CHECK(m.loss == doctest::Approx(4.0).epsilon(1e-3));
  CHECK(m.epe == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(m.mask_keep == 1.0);
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto run = [](uint64_t seed) {
    Rng init(seed);
    Network<float> net = make_compact_network<float>(2);
    init_weights(net, init);
    AdamState<float> adam = make_adam_state(net);
    StageParams<float> stage;
    stage.depth = 1;
    stage.steps = 3;
    stage.min_size = 24;
    stage.max_size = 24;
    stage.lr = 1e-3;
    stage.max_magnitude = 2;
    TrainHyper<float> hyper;
    Rng rng(seed + 1);
    std::vector<StepMetrics> out;
    for (int i = 0; i < 3; ++i) {
      const Image<float> img = texture(24, 24, 1, seed + 10 + uint64_t(i));
      const TrainSample<float> s = synth_constant_shift(img, 1.5f, 0.0f);
      out.push_back(train_step(net, s, stage, hyper, adam, rng));
    }
    std::vector<float> weights;
    for (float* p : testutil::parameter_pointers(net)) weights.push_back(*p);
    return std::make_pair(out, weights);
  };
  const auto a = run(423);
  const auto b = run(423);
  REQUIRE(a.first.size() == b.first.size());
  for (size_t i = 0; i < a.first.size(); ++i) {
    CHECK(a.first[i].loss == b.first[i].loss);
    CHECK(a.first[i].epe == b.first[i].epe);
    CHECK(a.first[i].mask_keep == b.first[i].mask_keep);
  }
  CHECK(a.second == b.second);
}

TEST_CASE("repeated steps on one sample reduce the loss") {
  Rng rng(425);
  Network<float> net = make_compact_network<float>(2);
  init_weights(net, rng);
  AdamState<float> adam = make_adam_state(net);
  const Image<float> img = texture(24, 24, 1, 426);
  const TrainSample<float> sample = synth_constant_shift(img, 1.5f, 0.0f);
  StageParams<float> stage;
  stage.depth = 0;
  stage.steps = 1;
  stage.min_size = 24;
  stage.max_size = 24;
  stage.lr = 3e-3;
  stage.max_magnitude = 2;
  TrainHyper<float> hyper;
  double first = 0, last = 0;
  for (int i = 0; i < 40; ++i) {
    const StepMetrics m = train_step(net, sample, stage, hyper, adam, rng);
    if (i == 0) first = m.loss;
    last = m.loss;
  }
  CHECK(last < 0.5 * first);
}

TEST_CASE("deeper stages harvest one pair per level") {
  Rng rng(427);
  Network<float> net = make_compact_network<float>(2);
  init_weights(net, rng);
  CnnEstimator<float> est(&net, 4.0f);
  const Image<float> img = texture(48, 48, 1, 428);
  RecursionConfig cfg;
  cfg.max_depth = 2;
  cfg.stereo = StereoMode::on;
  int calls = 0;
  LevelObserver<float> obs = [&](int, const Image<float>&, const Image<float>&,
                                 const DisplacementField<float>&) { ++calls; };
  register_images(img, img, est, cfg, nullptr, obs);
  CHECK(calls == 3);  // depths 2, 1, 0
}

TEST_CASE("curriculum schedules reject malformed stage lists") {
  auto stage = [](int depth, int steps, int min_size, int max_size, double lr,
                  float mag) {
    StageParams<float> st;
    st.depth = depth;
    st.steps = steps;
    st.min_size = min_size;
    st.max_size = max_size;
    st.lr = lr;
    st.max_magnitude = mag;
    return st;
  };

  CurriculumSchedule<float> empty;
  CHECK_THROWS_AS(empty.validate(9, 9), std::invalid_argument);

  CurriculumSchedule<float> late_start;
  late_start.stages = {stage(1, 10, 16, 32, 1e-3, 2)};
  CHECK_THROWS_AS(late_start.validate(9, 9), std::invalid_argument);

  CurriculumSchedule<float> decreasing;
  decreasing.stages = {stage(0, 10, 16, 32, 1e-3, 2),
                       stage(2, 10, 16, 32, 1e-3, 2),
                       stage(1, 10, 16, 32, 1e-3, 2)};
  CHECK_THROWS_AS(decreasing.validate(9, 9), std::invalid_argument);

  CurriculumSchedule<float> no_steps;
  no_steps.stages = {stage(0, 0, 16, 32, 1e-3, 2)};
  CHECK_THROWS_AS(no_steps.validate(9, 9), std::invalid_argument);

  CurriculumSchedule<float> too_small;
  too_small.stages = {stage(0, 10, 8, 32, 1e-3, 2)};
  CHECK_THROWS_AS(too_small.validate(9, 9), std::invalid_argument);

  CurriculumSchedule<float> inverted;
  inverted.stages = {stage(0, 10, 32, 16, 1e-3, 2)};
  CHECK_THROWS_AS(inverted.validate(9, 9), std::invalid_argument);

  CurriculumSchedule<float> bad_lr;
  bad_lr.stages = {stage(0, 10, 16, 32, 0.0, 2)};
  CHECK_THROWS_AS(bad_lr.validate(9, 9), std::invalid_argument);

  CurriculumSchedule<float> ok;
  ok.stages = {stage(0, 10, 16, 32, 1e-3, 2), stage(1, 10, 16, 32, 1e-4, 4)};
  CHECK_NOTHROW(ok.validate(9, 9));
}

TEST_CASE("train configs parse every documented key") {
  const std::string text =
      "# full smoke config\n"
      "seed = 7\n"
      "network = compact\n"
      "image_channels = 1\n"
      "mu = 4\n"
      "continuity = 0.45\n"
      "blur_sigma = 1\n"
      "mask_limit = 4\n"
      "stereo = 1\n"
      "mode = constant\n"
      "dataset_fraction = 0.25\n"
      "checkpoint = out.ckpt\n"
      "checkpoint_interval = 50\n"
      "max_masked_fraction = 0.3\n"
      "stage = depth=0 steps=100 min_size=16 max_size=32 lr=1e-3 magnitude=2\n"
      "stage = depth=1 steps=50 min_size=16 max_size=32 lr=1e-4 magnitude=4\n";
  const TrainConfig cfg = parse_train_config_text(text, "mem");
  CHECK(cfg.seed == 7);
  CHECK(cfg.network == "compact");
  CHECK(cfg.image_channels == 1);
  CHECK(cfg.hyper.mu == 4.0f);
  CHECK(cfg.hyper.continuity == 0.45f);
  CHECK(cfg.hyper.stereo);
  CHECK(cfg.hyper.mode == DistortionMode::constant_shift);
  CHECK(cfg.dataset_fraction == 0.25);
  CHECK(cfg.checkpoint == "out.ckpt");
  CHECK(cfg.checkpoint_interval == 50);
  CHECK(cfg.max_masked_fraction == 0.3);
  REQUIRE(cfg.schedule.stages.size() == 2);
  CHECK(cfg.schedule.stages[0].depth == 0);
  CHECK(cfg.schedule.stages[0].steps == 100);
  CHECK(cfg.schedule.stages[0].lr == 1e-3);
  CHECK(cfg.schedule.stages[0].max_magnitude == 2.0f);
  CHECK(cfg.schedule.stages[1].depth == 1);
  CHECK_NOTHROW(cfg.schedule.validate(9, 9));
}

TEST_CASE("config errors carry the origin and line number") {
  auto message_of = [](const std::string& text) {
    try {
      parse_train_config_text(text, "cfg");
    } catch (const std::invalid_argument& e) {
      return std::string(e.what());
    }
    return std::string();
  };

  CHECK(message_of("seed 7\n").find("cfg:1") == 0);
  CHECK(message_of("seed = \n").find("cfg:1") == 0);
  CHECK(message_of("seed = x\n").find("not an integer") != std::string::npos);
  CHECK(message_of("mu = four\n").find("not a number") != std::string::npos);
  CHECK(message_of("unknown_key = 1\n").find("unknown key") !=
        std::string::npos);
  CHECK(message_of("mode = blurry\n").find("mode must be") !=
        std::string::npos);
  CHECK(message_of("\n\nnetwork = resnet\n").find("cfg:3") == 0);

  // Smooth mode requires a sigma on every stage; constant mode does not.
  const std::string no_sigma =
      "mode = smooth\nstage = depth=0 steps=10 min_size=16 max_size=32 "
      "lr=1e-3 magnitude=2\n";
  CHECK(message_of(no_sigma).find("needs sigma") != std::string::npos);
  const std::string constant_ok =
      "mode = constant\nstage = depth=0 steps=10 min_size=16 max_size=32 "
      "lr=1e-3 magnitude=2\n";
  CHECK(message_of(constant_ok).empty());

  CHECK(message_of("stage = depth=0 steps=10\n").find("needs magnitude") !=
        std::string::npos);
  CHECK(message_of("stage = depth:0\n").find("key=value") != std::string::npos);
  CHECK(message_of("seed = 1\n").find("no stage") != std::string::npos);
  CHECK(message_of("network = stereo\nstage = depth=0 steps=1 min_size=19 "
                   "max_size=32 lr=1e-3 magnitude=2 sigma=4\n")
            .find("image_channels = 3") != std::string::npos);
  CHECK(message_of("dataset_fraction = 1.5\nmode = constant\nstage = depth=0 "
                   "steps=1 min_size=16 max_size=32 lr=1e-3 magnitude=2\n")
            .find("dataset_fraction") != std::string::npos);
  CHECK(message_of("max_masked_fraction = -0.1\nmode = constant\nstage = "
                   "depth=0 steps=1 min_size=16 max_size=32 lr=1e-3 "
                   "magnitude=2\n")
            .find("max_masked_fraction") != std::string::npos);
}

TEST_CASE("run_training produces metrics lines and a loadable outcome") {
  const std::string text =
      "seed = 11\n"
      "network = compact\n"
      "image_channels = 1\n"
      "mode = constant\n"
      "mu = 4\n"
      "stage = depth=0 steps=4 min_size=16 max_size=24 lr=1e-3 magnitude=2\n";
  const TrainConfig cfg = parse_train_config_text(text, "mem");
  std::ostringstream metrics, log;
  const TrainOutcome out = run_training(cfg, &metrics, &log);
  CHECK(out.history.size() == 4);
  CHECK(count_parameters(out.net) == count_parameters(make_compact_network<float>(2)));
  CHECK(out.meta.mu == 4.0f);
  CHECK(out.meta.stereo);

  // One metrics line per step, each naming step, stage, loss, epe and keep.
  std::istringstream in(metrics.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    CHECK(line.find("step=") != std::string::npos);
    CHECK(line.find("stage=") != std::string::npos);
    CHECK(line.find("loss=") != std::string::npos);
    CHECK(line.find("epe=") != std::string::npos);
    CHECK(line.find("keep=") != std::string::npos);
    ++lines;
  }
  CHECK(lines == 4);
}

TEST_CASE("run_training is reproducible end to end") {
  const std::string text =
      "seed = 13\n"
      "network = compact\n"
      "image_channels = 1\n"
      "mode = constant\n"
      "stage = depth=0 steps=3 min_size=16 max_size=24 lr=1e-3 magnitude=2\n";
  const TrainConfig cfg = parse_train_config_text(text, "mem");
  TrainOutcome a = run_training(cfg, nullptr, nullptr);
  TrainOutcome b = run_training(cfg, nullptr, nullptr);
  REQUIRE(a.history.size() == b.history.size());
  for (size_t i = 0; i < a.history.size(); ++i)
    CHECK(a.history[i].loss == b.history[i].loss);
  const auto pa = testutil::parameter_pointers(a.net);
  const auto pb = testutil::parameter_pointers(b.net);
  REQUIRE(pa.size() == pb.size());
  bool identical = true;
  for (size_t i = 0; i < pa.size(); ++i) identical = identical && *pa[i] == *pb[i];
  CHECK(identical);
}

TEST_SUITE_END();
