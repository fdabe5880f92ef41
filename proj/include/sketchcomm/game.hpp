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

#ifndef SKETCHCOMM_GAME_HPP_
#define SKETCHCOMM_GAME_HPP_

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sketchcomm/dataset.hpp"
#include "sketchcomm/rng.hpp"

namespace sketchcomm {

enum class GameVariant { kOriginal, kOoSame, kOoDifferent };

std::string GameVariantName(GameVariant variant);
GameVariant ParseGameVariant(const std::string& name);

struct GameConfig {
  GameVariant variant = GameVariant::kOoDifferent;
  int distractors = 9;  // K
  uint64_t seed = 1;

  int pool_size() const { return distractors + 1; }
};

// Dataset indices throughout.
struct GameRound {
  int sender_target = 0;
  std::vector<int> pool;    // K+1 receiver candidates
  int target = 0;           // y, index into pool
  std::vector<int> labels;  // class label per pool entry, empty if unlabeled
  int sender_label = -1;
};

// K+1 games sharing one receiver pool. Sketch i is drawn from
// sender_targets[i] and must be matched to pool[permutation[i]].
struct GameBatch {
  std::vector<int> sender_targets;
  std::vector<int> pool;
  std::vector<int> permutation;
  std::vector<int> labels;
  std::vector<int> sender_labels;

  size_t size() const { return sender_targets.size(); }
  GameRound Round(size_t i) const;
};

class GameSampler {
 public:
  // Throws std::invalid_argument if the dataset cannot satisfy the variant.
  GameSampler(const Dataset& dataset, const GameConfig& config);

  GameRound SampleRound(Rng& rng) const;
  GameBatch MakeBatch(Rng& rng, bool identity_permutation = false) const;

  const GameConfig& config() const { return config_; }

 private:
  // Pool for one round or batch, in random order.
  std::vector<int> SamplePool(Rng& rng) const;
  // The sender's photo for a receiver target.
  int SenderFor(int pool_image, Rng& rng) const;

  const Dataset* dataset_;
  GameConfig config_;
  std::vector<std::vector<int>> by_class_;
  std::vector<int> nonempty_classes_;
};

// Throws std::invalid_argument naming the broken invariant, if any.
void CheckRound(const GameRound& round, GameVariant variant, int pool_size);

double CommRate(std::span<const int> predictions, std::span<const int> targets);
// labels[i] holds the pool labels of round i.
double ClassCommRate(std::span<const int> predictions, std::span<const int> targets,
                     const std::vector<std::vector<int>>& labels);

// One JSON object per line: variant, sender_target, pool, labels, target,
// prediction.
void WriteRoundLog(std::ostream& out, GameVariant variant, const GameRound& round, int prediction);

}  // namespace sketchcomm

#endif  // SKETCHCOMM_GAME_HPP_
