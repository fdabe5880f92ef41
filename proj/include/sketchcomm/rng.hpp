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

#ifndef SKETCHCOMM_RNG_HPP_
#define SKETCHCOMM_RNG_HPP_

#include <cstdint>
#include <utility>
#include <vector>

namespace sketchcomm {

// Counter-based SplitMix64 ("CSM64").
//
//   key      = mix64(seed ^ mix64(stream + 0x632BE59BD9B4E019))
//   output_k = mix64(key + k * 0x9E3779B97F4A7C15),  k = 1, 2, ...
//
// where mix64 is the SplitMix64 finalizer. Every derived quantity (bounded
// integers, floats, shuffles) is defined below in terms of output_k only, so
// a (seed, stream, position) triple names the same values on every platform.
class Rng {
 public:
  Rng(uint64_t seed, uint64_t stream = 0);

  uint64_t Next();
  // Uniform in [0, n) by rejection of the biased low range. n must be > 0.
  uint64_t UniformInt(uint64_t n);
  // Uniform in [0, 1) with 24 bits of resolution.
  float UniformFloat();
  // Uniform in [lo, hi).
  float Uniform(float lo, float hi) { return lo + (hi - lo) * UniformFloat(); }

  template <typename T>
  void Shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(UniformInt(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // k distinct values from [0, n), in sampled order.
  std::vector<int> SampleWithoutReplacement(int n, int k);
  std::vector<int> Permutation(int n);

  uint64_t seed() const { return seed_; }
  uint64_t stream() const { return stream_; }
  uint64_t position() const { return counter_; }
  void set_position(uint64_t position) { counter_ = position; }

 private:
  uint64_t seed_;
  uint64_t stream_;
  uint64_t key_;
  uint64_t counter_ = 0;
};

uint64_t Mix64(uint64_t z);

}  // namespace sketchcomm

#endif  // SKETCHCOMM_RNG_HPP_
