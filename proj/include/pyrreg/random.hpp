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

#include <cmath>
#include <cstdint>
#include <random>

namespace pyrreg {

/// Deterministic random source. The core generator is std::mt19937 (seeded
/// directly with the 32 low bits of the seed), and every transform on top of
/// it is spelled out here rather than delegated to std::*_distribution, whose
/// algorithms vary between standard libraries:
///
///   uniform():     next_u32() * 2^-32, in [0, 1)
///   normal():      Box-Muller, two uniforms per call, cosine branch only
///   uniform_int(): multiply-shift range reduction, (u64(next_u32()) * n) >> 32
///   fork(k):       splitmix64 mix of (seed, k) producing a child seed
///
/// Two runs with the same seed and the same call sequence yield identical
/// streams on any platform; a port to another language only needs mt19937
/// plus these four formulas.
class Rng {
 public:
  explicit Rng(uint64_t seed)
      : seed_(seed), core_(static_cast<uint32_t>(seed)) {}

  uint32_t next_u32() { return core_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u32()) * 0x1p-32;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal. Consumes exactly two uniforms.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1p-32;  // guard log(0)
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// Uniform integer in [0, n). n must be positive.
  int uniform_int(int n) {
    const uint64_t wide = static_cast<uint64_t>(next_u32()) *
                          static_cast<uint64_t>(static_cast<uint32_t>(n));
    return static_cast<int>(wide >> 32);
  }

  /// Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) { return lo + uniform_int(hi - lo + 1); }

  /// Independent child stream, derived from this generator's original seed
  /// and the stream index. Forking does not consume state from the parent.
  Rng fork(uint64_t stream) const {
    return Rng(mix(seed_ + 0x9e3779b97f4a7c15ull * (stream + 1)));
  }

  uint64_t seed() const { return seed_; }

 private:
  // splitmix64 finalizer.
  static uint64_t mix(uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  uint64_t seed_;
  std::mt19937 core_;
};

}  // namespace pyrreg
