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
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pyrreg/dataio.hpp"

namespace fs = std::filesystem;

namespace pyrreg {

namespace {

std::string find_existing(const fs::path& dir, const std::string& stem,
                          std::initializer_list<const char*> extensions) {
  for (const char* ext : extensions) {
    const fs::path p = dir / (stem + ext);
    if (fs::exists(p)) return p.string();
  }
  return {};
}

std::optional<int> parse_ndisp(const fs::path& calib) {
  std::ifstream in(calib);
  if (!in) return std::nullopt;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    if (line.substr(0, eq) != "ndisp") continue;
    try {
      return std::stoi(line.substr(eq + 1));
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace

DatasetIndex load_dataset(const std::string& root) {
  DatasetIndex index;
  if (!fs::is_directory(root)) {
    index.warnings.push_back(root + ": not a directory");
    return index;
  }

  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());

  for (const auto& dir : dirs) {
    SceneRecord rec;
    rec.name = dir.filename().string();
    rec.left = find_existing(dir, "im0", {".ppm", ".pgm"});
    rec.right = find_existing(dir, "im1", {".ppm", ".pgm"});
    if (rec.left.empty() || rec.right.empty()) {
      index.warnings.push_back(rec.name + ": missing im0/im1, scene skipped");
      continue;
    }

    Image<float> left, right;
    try {
      left = read_image(rec.left);
      right = read_image(rec.right);
    } catch (const std::exception& e) {
      index.warnings.push_back(rec.name + ": " + e.what() + ", scene skipped");
      continue;
    }
    if (left.height() != right.height() || left.width() != right.width() ||
        left.channels() != right.channels()) {
      index.warnings.push_back(rec.name + ": im0/im1 shape mismatch, scene skipped");
      continue;
    }
    rec.height = left.height();
    rec.width = left.width();

    rec.disp_left = find_existing(dir, "disp0", {".pfm"});
    rec.disp_right = find_existing(dir, "disp1", {".pfm"});
    rec.supervised = !rec.disp_left.empty();
    rec.ndisp = parse_ndisp(dir / "calib.txt");
    index.scenes.push_back(std::move(rec));
  }
  return index;
}

}  // namespace pyrreg
