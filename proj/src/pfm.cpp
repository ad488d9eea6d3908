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

#include "pyrreg/dataio.hpp"

#include "io_util.hpp"

namespace pyrreg {

Plane<float> read_pfm(const std::string& path) {
  const std::string buf = io::read_file(path);
  io::Reader r(buf, path);

  const char m0 = r.take();
  const char m1 = r.take();
  if (m0 != 'P' || (m1 != 'f' && m1 != 'F')) r.fail("not a PFM file");
  if (m1 == 'F') r.fail("color PFM is not supported, expected grayscale 'Pf'");

  const int w = r.read_int(false);
  const int h = r.read_int(false);
  if (w < 1 || h < 1) r.fail("invalid dimensions");
  const double scale = r.read_float(false);
  if (scale == 0.0) r.fail("scale must be nonzero");
  const bool little_endian = scale < 0.0;
  // Exactly one whitespace byte separates the header from the payload.
  const char sep = r.take();
  if (sep != '\n' && sep != ' ' && sep != '\t' && sep != '\r')
    r.fail("missing separator before payload");

  const auto* bytes = reinterpret_cast<const unsigned char*>(
      r.raw(size_t(4) * size_t(w) * size_t(h)));
  if (!r.eof()) r.fail("trailing data after payload");

  Plane<float> out(h, w);
  // Rows are stored bottom-up.
  for (int y = 0; y < h; ++y) {
    const unsigned char* row = bytes + size_t(4) * size_t(w) * size_t(h - 1 - y);
    for (int x = 0; x < w; ++x)
      out(y, x) = io::float_from_bytes(row + 4 * x, little_endian);
  }
  return out;
}

void write_pfm(const Plane<float>& grid, const std::string& path) {
  const int h = static_cast<int>(grid.rows());
  const int w = static_cast<int>(grid.cols());
  require(h >= 1 && w >= 1, "write_pfm: empty grid");
  std::string out = "Pf\n" + std::to_string(w) + " " + std::to_string(h) +
                    "\n-1.0\n";
  out.reserve(out.size() + size_t(4) * size_t(w) * size_t(h));
  for (int y = h - 1; y >= 0; --y)
    for (int x = 0; x < w; ++x) io::float_to_le_bytes(grid(y, x), out);
  io::write_file(path, out);
}

}  // namespace pyrreg
