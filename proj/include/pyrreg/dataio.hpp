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

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pyrreg/cnn.hpp"
#include "pyrreg/image.hpp"

namespace pyrreg {

/// Parse failure in an on-disk format; byte_offset points at the first byte
/// the parser could not accept.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, size_t byte_offset)
      : std::runtime_error(what + " (at byte " + std::to_string(byte_offset) + ")"),
        offset_(byte_offset) {}

  size_t byte_offset() const { return offset_; }

 private:
  size_t offset_;
};

// PFM disparity grids: "Pf" grayscale, scale's sign encodes endianness,
// rows stored bottom-up (returned top-down), +infinity marks holes.
// The scale's magnitude is not applied to the samples.
Plane<float> read_pfm(const std::string& path);
void write_pfm(const Plane<float>& grid, const std::string& path);

// Binary 8-bit PNM. Samples map to [0,1] via /255; other maxvals rejected.
Image<float> read_ppm(const std::string& path);
Image<float> read_pgm(const std::string& path);
void write_ppm(const Image<float>& img, const std::string& path);
void write_pgm(const Image<float>& img, const std::string& path);

/// Dispatches on the magic bytes: P5, P6, or Pf (as a one-channel image).
Image<float> read_image(const std::string& path);

/// False-color rendering of a disparity plane: a fixed five-stop ramp whose
/// green channel rises monotonically, holes black. range_hint <= 0 picks the
/// 99th percentile of the finite magnitudes.
Image<float> render_disparity(const Plane<float>& dx, float range_hint);

struct SceneRecord {
  std::string name;
  std::string left, right;            // image paths
  std::string disp_left, disp_right;  // empty when absent
  std::optional<int> ndisp;
  int height = 0, width = 0;
  bool supervised = false;
};

struct DatasetIndex {
  std::vector<SceneRecord> scenes;
  std::vector<std::string> warnings;  // skipped scenes, one line each
};

/// Scans per-scene folders containing im0/im1 images plus optional
/// disp0/disp1 PFM ground truth and a calib.txt ndisp hint. Scenes missing
/// an image are skipped with a warning; missing ground truth only clears the
/// supervised flag.
DatasetIndex load_dataset(const std::string& root);

struct CheckpointMeta {
  float mu = 4.0f;
  bool stereo = true;
};

// Versioned binary checkpoint; layout documented in the README. Loading a
// different version or a schedule/payload mismatch raises FormatError.
void save_checkpoint(const Network<float>& net, const CheckpointMeta& meta,
                     const std::string& path);
std::pair<Network<float>, CheckpointMeta> load_checkpoint(const std::string& path);

}  // namespace pyrreg
