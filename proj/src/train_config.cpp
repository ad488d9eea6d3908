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

#include <charconv>
#include <sstream>

#include "pyrreg/trainer.hpp"

#include "io_util.hpp"

namespace pyrreg {

namespace {

[[noreturn]] void fail_at(const std::string& origin, int line,
                          const std::string& what) {
  throw std::invalid_argument(origin + ":" + std::to_string(line) + ": " + what);
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& origin, int line, const std::string& v) {
  try {
    size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail_at(origin, line, "not a number: '" + v + "'");
  }
}

long to_long(const std::string& origin, int line, const std::string& v) {
  try {
    size_t used = 0;
    const long n = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    fail_at(origin, line, "not an integer: '" + v + "'");
  }
}

// stage lines hold space-separated key=value pairs of their own.
StageParams<float> parse_stage(const std::string& origin, int line,
                               const std::string& text,
                               const TrainHyper<float>& hyper) {
  StageParams<float> st;
  st.max_magnitude = -1;
  st.smoothness_sigma = -1;
  std::istringstream in(text);
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos)
      fail_at(origin, line, "stage entries must be key=value, got '" + token + "'");
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "depth") st.depth = int(to_long(origin, line, value));
    else if (key == "steps") st.steps = int(to_long(origin, line, value));
    else if (key == "min_size") st.min_size = int(to_long(origin, line, value));
    else if (key == "max_size") st.max_size = int(to_long(origin, line, value));
    else if (key == "lr") st.lr = to_double(origin, line, value);
    else if (key == "magnitude") st.max_magnitude = float(to_double(origin, line, value));
    else if (key == "sigma") st.smoothness_sigma = float(to_double(origin, line, value));
    else fail_at(origin, line, "unknown stage key '" + key + "'");
  }
  if (st.max_magnitude < 0) fail_at(origin, line, "stage needs magnitude=");
  if (st.smoothness_sigma < 0) {
    if (hyper.mode == DistortionMode::smooth_field)
      fail_at(origin, line, "stage needs sigma= in smooth mode");
    st.smoothness_sigma = 0;
  }
  return st;
}

}  // namespace

TrainConfig parse_train_config_text(const std::string& text,
                                    const std::string& origin) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  // Stages reference hyper.mode, so remember them and parse at the end.
  std::vector<std::pair<int, std::string>> stage_lines;

  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw);
    const auto hash = s.find('#');
    if (hash != std::string::npos) s = trim(s.substr(0, hash));
    if (s.empty()) continue;

    const auto eq = s.find('=');
    if (eq == std::string::npos) fail_at(origin, line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (value.empty()) fail_at(origin, line, "empty value for '" + key + "'");

    if (key == "seed") cfg.seed = uint64_t(to_long(origin, line, value));
    else if (key == "network") {
      if (value != "compact" && value != "stereo")
        fail_at(origin, line, "network must be compact or stereo");
      cfg.network = value;
    } else if (key == "image_channels") {
      cfg.image_channels = int(to_long(origin, line, value));
      if (cfg.image_channels != 1 && cfg.image_channels != 3)
        fail_at(origin, line, "image_channels must be 1 or 3");
    } else if (key == "mu") cfg.hyper.mu = float(to_double(origin, line, value));
    else if (key == "continuity") cfg.hyper.continuity = float(to_double(origin, line, value));
    else if (key == "blur_sigma") cfg.hyper.blur_sigma = float(to_double(origin, line, value));
    else if (key == "mask_limit") cfg.hyper.mask_limit = float(to_double(origin, line, value));
    else if (key == "stereo") cfg.hyper.stereo = to_long(origin, line, value) != 0;
    else if (key == "mode") {
      if (value == "smooth") cfg.hyper.mode = DistortionMode::smooth_field;
      else if (value == "constant") cfg.hyper.mode = DistortionMode::constant_shift;
      else fail_at(origin, line, "mode must be smooth or constant");
    } else if (key == "dataset") cfg.dataset = value;
    else if (key == "dataset_fraction") cfg.dataset_fraction = to_double(origin, line, value);
    else if (key == "checkpoint") cfg.checkpoint = value;
    else if (key == "checkpoint_interval") cfg.checkpoint_interval = to_long(origin, line, value);
    else if (key == "max_masked_fraction")
      cfg.max_masked_fraction = to_double(origin, line, value);
    else if (key == "stage") stage_lines.emplace_back(line, value);
    else fail_at(origin, line, "unknown key '" + key + "'");
  }

  for (const auto& [ln, text_] : stage_lines)
    cfg.schedule.stages.push_back(parse_stage(origin, ln, text_, cfg.hyper));
  if (cfg.schedule.stages.empty())
    fail_at(origin, line, "config defines no stage");
  if (cfg.network == "stereo" && cfg.image_channels != 3)
    fail_at(origin, line, "the stereo network needs image_channels = 3");
  if (cfg.dataset_fraction < 0 || cfg.dataset_fraction > 1)
    fail_at(origin, line, "dataset_fraction must lie in [0, 1]");
  if (cfg.max_masked_fraction < 0 || cfg.max_masked_fraction > 1)
    fail_at(origin, line, "max_masked_fraction must lie in [0, 1]");
  return cfg;
}

TrainConfig parse_train_config(const std::string& path) {
  return parse_train_config_text(io::read_file(path), path);
}

}  // namespace pyrreg
