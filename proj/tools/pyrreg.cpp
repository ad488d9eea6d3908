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

// Command-line front end: register, train, eval, synth, inspect.
//
// Every command is deterministic for a fixed seed and --threads 1. On any
// failure the process exits 1 with a one-line diagnostic and removes the
// outputs it had started writing.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "pyrreg/cnn_estimator.hpp"
#include "pyrreg/dataio.hpp"
#include "pyrreg/eval.hpp"
#include "pyrreg/pyramid.hpp"
#include "pyrreg/trainer.hpp"

namespace {

using namespace pyrreg;

constexpr uint64_t kDefaultSeed = 20260814;

/// Deletes the registered output files unless the command completed. Keeps
/// the "exit 0 iff all requested outputs were written" contract honest: a
/// failure half-way never leaves a truncated artifact behind.
class OutputGuard {
 public:
  void track(const std::string& path) { paths_.push_back(path); }
  void commit() { committed_ = true; }
  ~OutputGuard() {
    if (committed_) return;
    for (const auto& p : paths_) {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
  }

 private:
  std::vector<std::string> paths_;
  bool committed_ = false;
};

struct EstimatorChoice {
  std::string kind = "oracle";  // oracle | cnn
  std::string checkpoint;
  int mu = 2;
  int radius = 3;
};

void add_estimator_flags(CLI::App* cmd, EstimatorChoice* est) {
  cmd->add_option("--estimator", est->kind, "Displacement estimator")
      ->check(CLI::IsMember({"oracle", "cnn"}))
      ->capture_default_str();
  cmd->add_option("--checkpoint", est->checkpoint,
                  "Network checkpoint (cnn estimator)");
  cmd->add_option("--mu", est->mu, "Oracle search radius in pixels")
      ->capture_default_str();
  cmd->add_option("--radius", est->radius, "Oracle patch radius in pixels")
      ->capture_default_str();
}

/// Holds whichever estimator the flags selected plus the pieces it borrows.
struct BuiltEstimator {
  std::unique_ptr<Network<float>> net;
  CheckpointMeta meta;
  std::unique_ptr<Estimator<float>> est;
  bool stereo = true;
};

BuiltEstimator build_estimator(const EstimatorChoice& c) {
  BuiltEstimator b;
  if (c.kind == "cnn") {
    require(!c.checkpoint.empty(), "cnn estimator needs --checkpoint");
    auto [net, meta] = load_checkpoint(c.checkpoint);
    b.net = std::make_unique<Network<float>>(std::move(net));
    b.meta = meta;
    b.stereo = meta.stereo;
    b.est = std::make_unique<CnnEstimator<float>>(b.net.get(), meta.mu);
  } else {
    b.est = std::make_unique<BlockMatchEstimator<float>>(c.mu, c.radius);
  }
  return b;
}

int max_trace_depth(const LevelTrace& trace) {
  int d = 0;
  for (const auto& e : trace)
    if (!e.base_case) d = std::max(d, e.depth);
  return d;
}

// ---------------------------------------------------------------------------
// register

struct RegisterArgs {
  std::string left, right, out;
  std::string color_out, dy_out;
  EstimatorChoice est;
  int max_depth = -1;  // negative = unlimited
  bool stereo = true;
  float color_range = 0;
};

void cmd_register(const RegisterArgs& a) {
  OutputGuard guard;
  const Image<float> img1 = read_image(a.left);
  const Image<float> img2 = read_image(a.right);

  BuiltEstimator built = build_estimator(a.est);
  RecursionConfig cfg;
  if (a.max_depth >= 0) cfg.max_depth = a.max_depth;
  cfg.stereo = a.stereo && built.stereo ? StereoMode::on : StereoMode::off;
  cfg.capture_trace = true;

  LevelTrace trace;
  const auto t0 = std::chrono::steady_clock::now();
  const DisplacementField<float> d =
      register_images(img1, img2, *built.est, cfg, &trace);
  const auto t1 = std::chrono::steady_clock::now();
  const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

  guard.track(a.out);
  write_pfm(d.dx, a.out);
  if (!a.dy_out.empty()) {
    guard.track(a.dy_out);
    write_pfm(d.dy, a.dy_out);
  }
  if (!a.color_out.empty()) {
    guard.track(a.color_out);
    write_ppm(render_disparity(d.dx, a.color_range), a.color_out);
  }

  const float range =
      effective_range(cfg, built.est->spec(), img1.height(), img1.width());
  std::printf("depth %d (%zu levels), effective range %.1f px, %.1f ms\n",
              max_trace_depth(trace), trace.size(), double(range), ms);
  guard.commit();
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config;
  std::string metrics_out;
};

void cmd_train(const TrainArgs& a) {
  OutputGuard guard;
  const TrainConfig cfg = parse_train_config(a.config);
  if (!cfg.checkpoint.empty()) guard.track(cfg.checkpoint);

  std::ofstream metrics_file;
  if (!a.metrics_out.empty()) {
    guard.track(a.metrics_out);
    metrics_file.open(a.metrics_out);
    require(metrics_file.good(), "cannot open " + a.metrics_out);
  }

  struct Tee : std::streambuf {
    std::streambuf* a = nullptr;
    std::streambuf* b = nullptr;
    int overflow(int ch) override {
      if (ch == EOF) return 0;
      if (a) a->sputc(char(ch));
      if (b) b->sputc(char(ch));
      return ch;
    }
  } tee;
  tee.a = std::cout.rdbuf();
  if (metrics_file.is_open()) tee.b = metrics_file.rdbuf();
  std::ostream metrics(&tee);

  run_training(cfg, &metrics, &std::cerr);
  guard.commit();
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string dataset_root;
  std::string pred_dir;
  std::string report_out;
  EstimatorChoice est;
  int max_depth = -1;
  double occlusion_tol = 1.0;
};

DisplacementField<float> predict_scene(const SceneRecord& scene,
                                       const EvalArgs& a,
                                       const BuiltEstimator* built) {
  if (!a.pred_dir.empty()) {
    const auto path =
        std::filesystem::path(a.pred_dir) / (scene.name + ".pfm");
    DisplacementField<float> d(scene.height, scene.width);
    const Plane<float> dx = read_pfm(path.string());
    require(dx.rows() == scene.height && dx.cols() == scene.width,
            scene.name + ": prediction shape mismatch");
    d.dx = dx;
    return d;
  }
  const Image<float> img1 = read_image(scene.left);
  const Image<float> img2 = read_image(scene.right);
  RecursionConfig cfg;
  if (a.max_depth >= 0) cfg.max_depth = a.max_depth;
  cfg.stereo = built->stereo ? StereoMode::on : StereoMode::off;
  return register_images(img1, img2, *built->est, cfg);
}

void cmd_eval(const EvalArgs& a) {
  OutputGuard guard;
  const DatasetIndex index = load_dataset(a.dataset_root);
  for (const auto& w : index.warnings) std::cerr << "warning: " << w << "\n";

  BuiltEstimator built;
  if (a.pred_dir.empty()) built = build_estimator(a.est);

  std::ofstream report;
  if (!a.report_out.empty()) {
    guard.track(a.report_out);
    report.open(a.report_out);
    require(report.good(), "cannot open " + a.report_out);
  }

  int evaluated = 0;
  double sum_bad2_all = 0, sum_bad2_noc = 0;
  int noc_scenes = 0;
  for (const auto& scene : index.scenes) {
    if (!scene.supervised) {
      std::cerr << "warning: " << scene.name << ": no ground truth, skipped\n";
      continue;
    }
    const DisplacementField<float> pred = predict_scene(scene, a, &built);
    const Plane<float> gt = read_pfm(scene.disp_left);
    require(gt.rows() == scene.height && gt.cols() == scene.width,
            scene.name + ": ground truth shape mismatch");

    // Occlusions from left-right consistency when both views have truth.
    std::unique_ptr<OcclusionResult> occl;
    if (!scene.disp_right.empty()) {
      DisplacementField<float> dl(scene.height, scene.width);
      DisplacementField<float> dr(scene.height, scene.width);
      dl.dx = gt.isFinite().select(gt, 0.0f);
      dr.dx = read_pfm(scene.disp_right);
      dr.dx = dr.dx.isFinite().select(dr.dx, 0.0f);
      // Middlebury disparities are stored unsigned; the left view maps to
      // the right by -disp, so the consistency check needs opposite signs.
      dl.dx = -dl.dx;
      occl = std::make_unique<OcclusionResult>(
          occlusion_mask(dl, dr, float(a.occlusion_tol)));
    }

    const EvalReport all = bad_pixel_report(
        pred, gt, MaskPolicy::all, occl ? &occl->occluded : nullptr);
    std::cout << "all  " << format_report_line(scene.name, all) << "\n";
    double noc_bad2 = -1;
    if (occl) {
      const EvalReport noc = bad_pixel_report(pred, gt, MaskPolicy::non_occluded,
                                              &occl->occluded);
      std::cout << "noc  " << format_report_line(scene.name, noc) << "\n";
      noc_bad2 = noc.bad2;
      sum_bad2_noc += noc.bad2;
      ++noc_scenes;
    }
    if (report.is_open()) {
      char line[256];
      std::snprintf(line, sizeof line, "%s %.4f %.4f %.4f %.2f %.4f\n",
                    scene.name.c_str(), all.bad1, all.bad2, all.bad5,
                    all.max_error, all.occlusion_fraction);
      report << line;
      (void)noc_bad2;
    }
    sum_bad2_all += all.bad2;
    ++evaluated;
  }
  require(evaluated > 0, "no supervised scenes under " + a.dataset_root);
  std::printf("average over %d scenes: bad2 %.2f%%", evaluated,
              100 * sum_bad2_all / evaluated);
  if (noc_scenes > 0)
    std::printf(" (non-occluded %.2f%%)", 100 * sum_bad2_noc / noc_scenes);
  std::printf("\n");
  guard.commit();
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string input, out_image, out_truth;
  std::string out_dy;
  double magnitude = 8.0;
  double sigma = 8.0;
  double continuity = 0.45;
  std::string mode = "smooth";
  bool stereo = true;
  uint64_t seed = kDefaultSeed;
  double shift_dx = 0, shift_dy = 0;
  bool has_shift = false;
};

void cmd_synth(const SynthArgs& a) {
  OutputGuard guard;
  const Image<float> img = read_image(a.input);

  TrainSample<float> sample;
  if (a.has_shift) {
    sample = synth_constant_shift(img, float(a.shift_dx), float(a.shift_dy));
  } else {
    DistortionSpec<float> spec;
    spec.max_magnitude = float(a.magnitude);
    spec.continuity = float(a.continuity);
    spec.smoothness_sigma = float(a.sigma);
    spec.stereo = a.stereo;
    spec.mode = a.mode == "constant" ? DistortionMode::constant_shift
                                     : DistortionMode::smooth_field;
    sample = synth_distortion(img, spec, a.seed);
  }

  guard.track(a.out_image);
  if (sample.img2.channels() == 3)
    write_ppm(sample.img2, a.out_image);
  else
    write_pgm(sample.img2, a.out_image);
  guard.track(a.out_truth);
  write_pfm(sample.truth.dx, a.out_truth);
  if (!a.out_dy.empty()) {
    guard.track(a.out_dy);
    write_pfm(sample.truth.dy, a.out_dy);
  }
  const auto s = field_stats(sample.truth);
  std::printf("truth max |dx| %.2f px, max |dy| %.2f px\n", s.max_abs_dx,
              s.max_abs_dy);
  guard.commit();
}

// ---------------------------------------------------------------------------
// texture

struct TextureArgs {
  std::string out;
  int height = 256;
  int width = 256;
  int channels = 1;
  int detail = 1;
  uint64_t seed = kDefaultSeed;
};

void cmd_texture(const TextureArgs& a) {
  OutputGuard guard;
  Rng rng(a.seed);
  const Image<float> img =
      make_texture_image<float>(a.height, a.width, a.channels, rng, a.detail);
  guard.track(a.out);
  if (img.channels() == 3)
    write_ppm(img, a.out);
  else
    write_pgm(img, a.out);
  guard.commit();
}

// ---------------------------------------------------------------------------
// inspect

struct InspectArgs {
  std::string checkpoint;
  std::string arch;
  int channels = 1;
};

void print_network(const Network<float>& net) {
  const auto [win_h, win_w] = input_window(net);
  const int in_c = network_input_channels(net);
  const auto shapes = layer_output_shapes(net, win_h, win_w, in_c);
  std::printf("input window %dx%dx%d\n", win_h, win_w, in_c);
  long total = 0;
  for (size_t i = 0; i < net.items.size(); ++i) {
    const auto& s = shapes[i];
    if (const auto* conv = std::get_if<ConvLayer<float>>(&net.items[i])) {
      const long p = conv->parameter_count();
      total += p;
      std::printf("%2zu conv %dx%d %3d->%3d %-6s out %2dx%2dx%3d params %6ld\n",
                  i, conv->kh, conv->kw, conv->cin, conv->cout,
                  conv->act == Activation::relu ? "relu" : "linear", s.height,
                  s.width, s.channels, p);
    } else {
      const auto& drop = std::get<DropoutLayer<float>>(net.items[i]);
      std::printf("%2zu dropout rate %.2f       out %2dx%2dx%3d\n", i,
                  double(drop.rate), s.height, s.width, s.channels);
    }
  }
  std::printf("total %ld\n", total);
}

void cmd_inspect(const InspectArgs& a) {
  if (!a.checkpoint.empty()) {
    auto [net, meta] = load_checkpoint(a.checkpoint);
    std::printf("checkpoint %s: mu %.1f, %s\n", a.checkpoint.c_str(),
                double(meta.mu), meta.stereo ? "stereo" : "2d");
    print_network(net);
    return;
  }
  if (a.arch == "stereo") {
    print_network(make_stereo_network<float>());
    return;
  }
  print_network(make_compact_network<float>(2 * a.channels));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recursive pyramidal image registration"};
  app.require_subcommand(1);
  int threads = int(hardware_threads());
  app.add_option("--threads", threads,
                 "Worker threads for all parallel sections")
      ->capture_default_str();

  RegisterArgs reg;
  auto* creg = app.add_subcommand(
      "register", "Estimate the displacement field between two images");
  creg->add_option("left", reg.left, "First (reference) image")->required();
  creg->add_option("right", reg.right, "Second image")->required();
  creg->add_option("out", reg.out, "Output horizontal displacement (PFM)")
      ->required();
  creg->add_option("--color", reg.color_out, "False-color rendering (PPM)");
  creg->add_option("--color-range", reg.color_range,
                   "Displacement mapped to the ramp end; 0 = automatic");
  creg->add_option("--out-dy", reg.dy_out, "Vertical displacement (PFM)");
  add_estimator_flags(creg, &reg.est);
  creg->add_option("--max-depth", reg.max_depth,
                   "Recursion depth cap; negative = unlimited")
      ->capture_default_str();
  creg->add_flag("--stereo,!--no-stereo", reg.stereo,
                 "Search along scanlines only")
      ->capture_default_str();

  TrainArgs tr;
  auto* ctr = app.add_subcommand("train", "Train a network from a config file");
  ctr->add_option("config", tr.config, "Training configuration file")
      ->required();
  ctr->add_option("--metrics", tr.metrics_out,
                  "Also write the per-step metrics stream to this file");

  EvalArgs ev;
  auto* cev = app.add_subcommand(
      "eval", "Score predictions against dataset ground truth");
  cev->add_option("dataset", ev.dataset_root, "Dataset root directory")
      ->required();
  cev->add_option("--pred-dir", ev.pred_dir,
                  "Directory of <scene>.pfm predictions; omit to run the "
                  "estimator here");
  cev->add_option("--report", ev.report_out,
                  "Machine-readable per-scene record file");
  add_estimator_flags(cev, &ev.est);
  cev->add_option("--max-depth", ev.max_depth,
                  "Recursion depth cap; negative = unlimited");
  cev->add_option("--occlusion-tol", ev.occlusion_tol,
                  "Left-right consistency tolerance in pixels")
      ->capture_default_str();

  SynthArgs sy;
  auto* csy = app.add_subcommand(
      "synth", "Distort an image into a registration sample with known truth");
  csy->add_option("input", sy.input, "Source image")->required();
  csy->add_option("image", sy.out_image, "Distorted second image (PPM/PGM)")
      ->required();
  csy->add_option("truth", sy.out_truth, "Ground-truth dx (PFM)")->required();
  csy->add_option("--out-dy", sy.out_dy, "Ground-truth dy (PFM)");
  csy->add_option("--magnitude", sy.magnitude, "Peak displacement in pixels")
      ->capture_default_str();
  csy->add_option("--sigma", sy.sigma, "Field smoothing in pixels")
      ->capture_default_str();
  csy->add_option("--continuity", sy.continuity,
                  "Bound on the field's discrete gradient")
      ->capture_default_str();
  csy->add_option("--mode", sy.mode, "Field shape")
      ->check(CLI::IsMember({"smooth", "constant"}))
      ->capture_default_str();
  csy->add_flag("--stereo,!--no-stereo", sy.stereo, "Horizontal-only field")
      ->capture_default_str();
  csy->add_option("--seed", sy.seed, "Random seed")->capture_default_str();
  auto* sdx = csy->add_option("--shift-dx", sy.shift_dx,
                              "Exact constant shift instead of a random field");
  csy->add_option("--shift-dy", sy.shift_dy, "Vertical part of --shift-dx");

  TextureArgs tx;
  auto* ctx = app.add_subcommand(
      "texture", "Write a seeded multi-scale noise image for self-tests");
  ctx->add_option("out", tx.out, "Output image (PPM/PGM)")->required();
  ctx->add_option("--height", tx.height, "Rows")->capture_default_str();
  ctx->add_option("--width", tx.width, "Columns")->capture_default_str();
  ctx->add_option("--channels", tx.channels, "1 or 3")->capture_default_str();
  ctx->add_option("--detail", tx.detail, "Smallest noise cell in pixels")
      ->capture_default_str();
  ctx->add_option("--seed", tx.seed, "Random seed")->capture_default_str();

  InspectArgs in;
  auto* cin = app.add_subcommand(
      "inspect", "Print a network's layers, shapes, and parameter counts");
  cin->add_option("checkpoint", in.checkpoint, "Checkpoint to describe");
  cin->add_option("--arch", in.arch, "Describe a built-in architecture instead")
      ->check(CLI::IsMember({"stereo", "compact"}));
  cin->add_option("--channels", in.channels,
                  "Image channels for the compact architecture")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    require(threads >= 1, "--threads must be at least 1");
    set_num_threads(threads);
    if (creg->parsed()) cmd_register(reg);
    if (ctr->parsed()) cmd_train(tr);
    if (cev->parsed()) cmd_eval(ev);
    if (csy->parsed()) {
      sy.has_shift = sdx->count() > 0;
      cmd_synth(sy);
    }
    if (ctx->parsed()) cmd_texture(tx);
    if (cin->parsed()) {
      require(!in.checkpoint.empty() || !in.arch.empty(),
              "inspect needs a checkpoint or --arch");
      cmd_inspect(in);
    }
  } catch (const std::exception& e) {
    std::cerr << "pyrreg: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
