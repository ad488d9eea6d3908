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

namespace {

constexpr char kMagic[8] = {'P', 'Y', 'R', 'N', 'E', 'T', 'C', 'K'};
constexpr uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const Network<float>& net, const CheckpointMeta& meta,
                     const std::string& path) {
  validate_network(net);
  std::string out(kMagic, sizeof kMagic);
  io::u32_to_le_bytes(kVersion, out);
  io::float_to_le_bytes(meta.mu, out);
  out.push_back(meta.stereo ? 1 : 0);
  io::u32_to_le_bytes(static_cast<uint32_t>(net.items.size()), out);

  for (const auto& item : net.items) {
    if (const auto* conv = std::get_if<ConvLayer<float>>(&item)) {
      out.push_back(0);
      io::u32_to_le_bytes(uint32_t(conv->kh), out);
      io::u32_to_le_bytes(uint32_t(conv->kw), out);
      io::u32_to_le_bytes(uint32_t(conv->cin), out);
      io::u32_to_le_bytes(uint32_t(conv->cout), out);
      out.push_back(conv->act == Activation::relu ? 0 : 1);
    } else {
      const auto& drop = std::get<DropoutLayer<float>>(item);
      out.push_back(1);
      io::float_to_le_bytes(drop.rate, out);
    }
  }

  for (const auto& item : net.items) {
    const auto* conv = std::get_if<ConvLayer<float>>(&item);
    if (!conv) continue;
    for (int ky = 0; ky < conv->kh; ++ky)
      for (int kx = 0; kx < conv->kw; ++kx)
        for (int ci = 0; ci < conv->cin; ++ci)
          for (int co = 0; co < conv->cout; ++co)
            io::float_to_le_bytes(
                conv->weights(conv->weight_row(ky, kx, ci), co), out);
    for (int co = 0; co < conv->cout; ++co)
      io::float_to_le_bytes(conv->bias(co), out);
  }

  io::write_file(path, out);
}

std::pair<Network<float>, CheckpointMeta> load_checkpoint(
    const std::string& path) {
  const std::string buf = io::read_file(path);
  io::Reader r(buf, path);

  const char* magic = r.raw(sizeof kMagic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw FormatError(path + ": not a checkpoint file", 0);
  const uint32_t version =
      io::u32_from_bytes(reinterpret_cast<const unsigned char*>(r.raw(4)));
  if (version != kVersion)
    throw FormatError(path + ": unsupported checkpoint version " +
                          std::to_string(version),
                      sizeof kMagic);

  CheckpointMeta meta;
  meta.mu = io::float_from_bytes(
      reinterpret_cast<const unsigned char*>(r.raw(4)), true);
  meta.stereo = *r.raw(1) != 0;
  const uint32_t items =
      io::u32_from_bytes(reinterpret_cast<const unsigned char*>(r.raw(4)));
  if (items == 0 || items > 4096) r.fail("implausible item count");

  Network<float> net;
  for (uint32_t i = 0; i < items; ++i) {
    const unsigned char kind =
        static_cast<unsigned char>(*r.raw(1));
    if (kind == 0) {
      const auto* b = reinterpret_cast<const unsigned char*>(r.raw(16));
      const int kh = int(io::u32_from_bytes(b));
      const int kw = int(io::u32_from_bytes(b + 4));
      const int cin = int(io::u32_from_bytes(b + 8));
      const int cout = int(io::u32_from_bytes(b + 12));
      if (kh < 1 || kw < 1 || cin < 1 || cout < 1 || kh > 1024 || kw > 1024 ||
          cin > 65536 || cout > 65536)
        r.fail("implausible layer dimensions");
      const unsigned char act = static_cast<unsigned char>(*r.raw(1));
      if (act > 1) r.fail("unknown activation code");
      net.items.emplace_back(ConvLayer<float>(
          kh, kw, cin, cout, act == 0 ? Activation::relu : Activation::linear));
    } else if (kind == 1) {
      const float rate = io::float_from_bytes(
          reinterpret_cast<const unsigned char*>(r.raw(4)), true);
      if (!(rate >= 0.0f && rate < 1.0f)) r.fail("invalid dropout rate");
      net.items.emplace_back(DropoutLayer<float>(rate));
    } else {
      r.fail("unknown item kind");
    }
  }
  validate_network(net);

  for (auto& item : net.items) {
    auto* conv = std::get_if<ConvLayer<float>>(&item);
    if (!conv) continue;
    const size_t count = size_t(conv->kh) * conv->kw * conv->cin * conv->cout;
    const auto* b = reinterpret_cast<const unsigned char*>(r.raw(4 * count));
    size_t k = 0;
    for (int ky = 0; ky < conv->kh; ++ky)
      for (int kx = 0; kx < conv->kw; ++kx)
        for (int ci = 0; ci < conv->cin; ++ci)
          for (int co = 0; co < conv->cout; ++co)
            conv->weights(conv->weight_row(ky, kx, ci), co) =
                io::float_from_bytes(b + 4 * k++, true);
    const auto* bb =
        reinterpret_cast<const unsigned char*>(r.raw(4 * size_t(conv->cout)));
    for (int co = 0; co < conv->cout; ++co)
      conv->bias(co) = io::float_from_bytes(bb + 4 * co, true);
  }

  if (!r.eof()) r.fail("trailing data after weights");
  return {std::move(net), meta};
}

}  // namespace pyrreg
