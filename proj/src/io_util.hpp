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

#include <cctype>
#include <cstring>
#include <fstream>
#include <string>

#include "pyrreg/dataio.hpp"

namespace pyrreg {
namespace io {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  return buf;
}

inline void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("write failed on " + path);
}

/// Cursor over a loaded file that reports the byte offset of any failure.
class Reader {
 public:
  Reader(const std::string& buf, const std::string& path)
      : buf_(buf), path_(path) {}

  size_t pos() const { return pos_; }
  bool eof() const { return pos_ >= buf_.size(); }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(path_ + ": " + what, pos_);
  }

  char peek() const {
    if (eof()) fail("unexpected end of file");
    return buf_[pos_];
  }

  char take() {
    const char c = peek();
    ++pos_;
    return c;
  }

  /// Skips whitespace; in PNM headers a '#' starts a comment to end of line.
  void skip_separators(bool allow_comments) {
    while (!eof()) {
      const char c = buf_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos_;
      } else if (allow_comments && c == '#') {
        while (!eof() && buf_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  int read_int(bool allow_comments) {
    skip_separators(allow_comments);
    if (eof() || !isdigit(static_cast<unsigned char>(peek())))
      fail("expected a decimal number");
    long v = 0;
    while (!eof() && isdigit(static_cast<unsigned char>(buf_[pos_]))) {
      v = v * 10 + (take() - '0');
      if (v > 1 << 30) fail("number out of range");
    }
    return static_cast<int>(v);
  }

  double read_float(bool allow_comments) {
    skip_separators(allow_comments);
    const size_t start = pos_;
    while (!eof()) {
      const char c = buf_[pos_];
      if (isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' ||
          c == '.' || c == 'e' || c == 'E')
        ++pos_;
      else
        break;
    }
    if (pos_ == start) fail("expected a floating-point number");
    try {
      return std::stod(buf_.substr(start, pos_ - start));
    } catch (const std::exception&) {
      pos_ = start;
      fail("malformed floating-point number");
    }
  }

  const char* raw(size_t count) {
    if (pos_ + count > buf_.size()) fail("payload truncated");
    const char* p = buf_.data() + pos_;
    pos_ += count;
    return p;
  }

 private:
  const std::string& buf_;
  std::string path_;
  size_t pos_ = 0;
};

inline float float_from_bytes(const unsigned char* b, bool little_endian) {
  const uint32_t u =
      little_endian
          ? (uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
             uint32_t(b[3]) << 24)
          : (uint32_t(b[3]) | uint32_t(b[2]) << 8 | uint32_t(b[1]) << 16 |
             uint32_t(b[0]) << 24);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

inline void float_to_le_bytes(float f, std::string& out) {
  uint32_t u;
  std::memcpy(&u, &f, 4);
  out.push_back(static_cast<char>(u & 0xff));
  out.push_back(static_cast<char>((u >> 8) & 0xff));
  out.push_back(static_cast<char>((u >> 16) & 0xff));
  out.push_back(static_cast<char>((u >> 24) & 0xff));
}

inline void u32_to_le_bytes(uint32_t u, std::string& out) {
  out.push_back(static_cast<char>(u & 0xff));
  out.push_back(static_cast<char>((u >> 8) & 0xff));
  out.push_back(static_cast<char>((u >> 16) & 0xff));
  out.push_back(static_cast<char>((u >> 24) & 0xff));
}

inline uint32_t u32_from_bytes(const unsigned char* b) {
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
         uint32_t(b[3]) << 24;
}

}  // namespace io
}  // namespace pyrreg
