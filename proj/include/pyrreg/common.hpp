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

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace pyrreg {

/// Thread budget for the data-parallel loops (warp rows, matcher offsets,
/// convolution bands). Results are bit-identical for any thread count:
/// every output element is computed by exactly one worker with the same
/// scalar arithmetic, and reductions stay sequential.
inline std::atomic<int>& thread_count_storage() {
  static std::atomic<int> n{1};
  return n;
}

inline void set_num_threads(int n) {
  thread_count_storage().store(std::max(1, n));
}

inline int num_threads() { return thread_count_storage().load(); }

inline int hardware_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

/// Runs body(i) for i in [begin, end), split into contiguous chunks across
/// the configured thread count.
template <class Body>
void parallel_for(int begin, int end, Body&& body) {
  const int n = end - begin;
  const int workers = std::min(num_threads(), n);
  if (workers <= 1) {
    for (int i = begin; i < end; ++i) body(i);
    return;
  }
  const int chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const int lo = begin + w * chunk;
    const int hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (int i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

[[noreturn]] inline void fail_invalid(const std::string& what) {
  throw std::invalid_argument(what);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) fail_invalid(what);
}

}  // namespace pyrreg
