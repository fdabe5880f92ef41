// Copyright 2026 The SketchComm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sketchcomm/rng.hpp"

#include <numeric>
#include <stdexcept>

namespace sketchcomm {

namespace {
constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr uint64_t kStreamSalt = 0x632BE59BD9B4E019ULL;
}  // namespace

uint64_t Mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Rng::Rng(uint64_t seed, uint64_t stream)
    : seed_(seed), stream_(stream), key_(Mix64(seed ^ Mix64(stream + kStreamSalt))) {}

uint64_t Rng::Next() {
  ++counter_;
  return Mix64(key_ + counter_ * kGolden);
}

uint64_t Rng::UniformInt(uint64_t n) {
  if (n == 0) throw std::invalid_argument("rng: empty range");
  const uint64_t threshold = (0 - n) % n;
  for (;;) {
    const uint64_t r = Next();
    if (r >= threshold) return r % n;
  }
}

float Rng::UniformFloat() {
  return static_cast<float>(Next() >> 40) * (1.0f / 16777216.0f);
}

std::vector<int> Rng::SampleWithoutReplacement(int n, int k) {
  if (k < 0 || k > n) throw std::invalid_argument("rng: cannot sample " + std::to_string(k) + " of " + std::to_string(n));
  std::vector<int> pool(static_cast<size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(UniformInt(static_cast<uint64_t>(n - i)));
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
  }
  pool.resize(static_cast<size_t>(k));
  return pool;
}

std::vector<int> Rng::Permutation(int n) { return SampleWithoutReplacement(n, n); }

}  // namespace sketchcomm
