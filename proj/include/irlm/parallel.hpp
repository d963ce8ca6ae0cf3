// Copyright 2026 The irlm Authors
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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

namespace irlm {

using Rng = std::mt19937_64;

/// Seed for stream `stream` of a run with master seed `master`. Distinct
/// streams are decorrelated through a splitmix64 finalizer.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream);

inline Rng make_rng(std::uint64_t master, std::uint64_t stream) {
  return Rng(stream_seed(master, stream));
}

/// Uniform draw in [0, 1) using the top 53 bits of one engine output.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Worker count used when a caller passes 0. Initialized from IRLM_THREADS,
/// falling back to the hardware concurrency.
unsigned default_threads();
void set_default_threads(unsigned n);

/// Calls body(begin, end) on disjoint chunks covering [0, count). Chunks
/// are contiguous so any per-index output written by `body` is independent
/// of the thread count.
void parallel_for(std::size_t count,
                  const std::function<void(std::size_t, std::size_t)>& body,
                  unsigned threads = 0);

}  // namespace irlm
