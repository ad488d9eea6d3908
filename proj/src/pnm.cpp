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

#include <cmath>

#include "pyrreg/dataio.hpp"

#include "io_util.hpp"

namespace pyrreg {

namespace {

Image<float> read_pnm(const std::string& path, char expected_kind) {
  const std::string buf = io::read_file(path);
  io::Reader r(buf, path);

  const char m0 = r.take();
  const char m1 = r.take();
  if (m0 != 'P' || (m1 != '5' && m1 != '6')) r.fail("not a binary PGM/PPM file");
  if (expected_kind != 0 && m1 != expected_kind)
    r.fail(std::string("expected P") + expected_kind);
  const int channels = m1 == '6' ? 3 : 1;

  const int w = r.read_int(true);
  const int h = r.read_int(true);
  if (w < 1 || h < 1) r.fail("invalid dimensions");
  const int maxval = r.read_int(true);
  if (maxval != 255)
    r.fail("only maxval 255 is supported, got " + std::to_string(maxval));
  const char sep = r.take();
  if (sep != '\n' && sep != ' ' && sep != '\t' && sep != '\r')
    r.fail("missing separator before payload");

  const auto* bytes = reinterpret_cast<const unsigned char*>(
      r.raw(size_t(channels) * size_t(w) * size_t(h)));
  if (!r.eof()) r.fail("trailing data after payload");

  Image<float> img(h, w, channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        img[c](y, x) =
            float(bytes[(size_t(y) * w + x) * channels + c]) / 255.0f;
  return img;
}

unsigned char quantize(float v) {
  const float scaled = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f);
  return static_cast<unsigned char>(scaled);
}

void write_pnm(const Image<float>& img, const std::string& path, char kind) {
  const int channels = kind == '6' ? 3 : 1;
  require(img.channels() == channels,
          std::string("write_p") + (kind == '6' ? "pm" : "gm") +
              ": wrong channel count");
  const int h = img.height();
  const int w = img.width();
  std::string out;
  out += 'P';
  out += kind;
  out += '\n' + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.reserve(out.size() + size_t(channels) * size_t(w) * size_t(h));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        out.push_back(static_cast<char>(quantize(img[c](y, x))));
  io::write_file(path, out);
}

}  // namespace

Image<float> read_ppm(const std::string& path) { return read_pnm(path, '6'); }
Image<float> read_pgm(const std::string& path) { return read_pnm(path, '5'); }

void write_ppm(const Image<float>& img, const std::string& path) {
  write_pnm(img, path, '6');
}

void write_pgm(const Image<float>& img, const std::string& path) {
  write_pnm(img, path, '5');
}

Image<float> read_image(const std::string& path) {
  const std::string buf = io::read_file(path);
  if (buf.size() >= 2 && buf[0] == 'P') {
    if (buf[1] == '6') return read_ppm(path);
    if (buf[1] == '5') return read_pgm(path);
    if (buf[1] == 'f' || buf[1] == 'F') {
      Image<float> img;
      img.planes.push_back(read_pfm(path));
      return img;
    }
  }
  throw FormatError(path + ": unrecognized image format", 0);
}

}  // namespace pyrreg
