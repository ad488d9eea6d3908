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

#include <iosfwd>
#include <string>

#include "pyrreg/dataio.hpp"
#include "pyrreg/train.hpp"

namespace pyrreg {

/// Full description of a training run, parsed from a key = value config.
/// Recognized keys are documented in the README next to the shipped configs.
struct TrainConfig {
  uint64_t seed = 20260814;
  std::string network = "compact";  // "compact" or "stereo"
  int image_channels = 1;           // per view
  TrainHyper<float> hyper;
  CurriculumSchedule<float> schedule;
  std::string dataset;         // optional scene-folder root
  double dataset_fraction = 0.5;
  std::string checkpoint;     // output path; empty skips saving
  long checkpoint_interval = 0;  // steps between periodic saves; 0 = final only
  /// Bootstrapping guard: a step that masks out more than this fraction of
  /// its pixels is logged, since it means the current depth produces coarse
  /// estimates the network cannot yet correct.
  double max_masked_fraction = 0.2;
};

TrainConfig parse_train_config(const std::string& path);
/// Same parser on in-memory text; origin only labels error messages.
TrainConfig parse_train_config_text(const std::string& text,
                                    const std::string& origin);

struct TrainOutcome {
  Network<float> net;
  CheckpointMeta meta;
  std::vector<StepMetrics> history;
};

/// Executes the curriculum: per step it synthesizes a sample (or draws and
/// crops a dataset scene), runs one train_step, and emits one metrics line.
/// Deterministic for a fixed config. metrics and log may be null.
TrainOutcome run_training(const TrainConfig& cfg, std::ostream* metrics,
                          std::ostream* log);

}  // namespace pyrreg
