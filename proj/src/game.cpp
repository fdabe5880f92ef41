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

#include "sketchcomm/game.hpp"

#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <stdexcept>

namespace sketchcomm {

std::string GameVariantName(GameVariant variant) {
  switch (variant) {
    case GameVariant::kOriginal:
      return "original";
    case GameVariant::kOoSame:
      return "oo_same";
    case GameVariant::kOoDifferent:
      return "oo_different";
  }
  return "unknown";
}

GameVariant ParseGameVariant(const std::string& name) {
  if (name == "original") return GameVariant::kOriginal;
  if (name == "oo_same") return GameVariant::kOoSame;
  if (name == "oo_different") return GameVariant::kOoDifferent;
  throw std::invalid_argument("unknown game variant '" + name + "'");
}

GameRound GameBatch::Round(size_t i) const {
  GameRound round;
  round.sender_target = sender_targets.at(i);
  round.pool = pool;
  round.target = permutation.at(i);
  round.labels = labels;
  if (!sender_labels.empty()) round.sender_label = sender_labels.at(i);
  return round;
}

GameSampler::GameSampler(const Dataset& dataset, const GameConfig& config) : dataset_(&dataset), config_(config) {
  const int k1 = config.pool_size();
  if (config.distractors < 1) throw std::invalid_argument("game: need at least one distractor");
  if (config.variant == GameVariant::kOriginal) {
    if (static_cast<size_t>(k1) > dataset.size()) {
      throw std::invalid_argument("game: K+1 = " + std::to_string(k1) + " exceeds dataset size " +
                                  std::to_string(dataset.size()));
    }
    return;
  }
  if (!dataset.labeled()) throw std::invalid_argument("game: " + GameVariantName(config.variant) + " needs labels");
  by_class_ = dataset.IndicesByClass();
  for (size_t c = 0; c < by_class_.size(); ++c) {
    if (!by_class_[c].empty()) nonempty_classes_.push_back(static_cast<int>(c));
  }
  if (static_cast<size_t>(k1) > nonempty_classes_.size()) {
    throw std::invalid_argument("game: K+1 = " + std::to_string(k1) + " exceeds the " +
                                std::to_string(nonempty_classes_.size()) + " populated classes");
  }
  if (config.variant == GameVariant::kOoDifferent) {
    for (int c : nonempty_classes_) {
      if (by_class_[static_cast<size_t>(c)].size() < 2) {
        const std::string name = static_cast<size_t>(c) < dataset.class_names.size()
                                     ? dataset.class_names[static_cast<size_t>(c)]
                                     : std::to_string(c);
        throw std::invalid_argument("game: oo_different needs two images per class, class '" + name +
                                    "' has only one");
      }
    }
  }
}

std::vector<int> GameSampler::SamplePool(Rng& rng) const {
  const int k1 = config_.pool_size();
  if (config_.variant == GameVariant::kOriginal) {
    return rng.SampleWithoutReplacement(static_cast<int>(dataset_->size()), k1);
  }
  std::vector<int> pool;
  pool.reserve(static_cast<size_t>(k1));
  for (int slot : rng.SampleWithoutReplacement(static_cast<int>(nonempty_classes_.size()), k1)) {
    const auto& members = by_class_[static_cast<size_t>(nonempty_classes_[static_cast<size_t>(slot)])];
    pool.push_back(members[rng.UniformInt(members.size())]);
  }
  return pool;
}

int GameSampler::SenderFor(int pool_image, Rng& rng) const {
  if (config_.variant != GameVariant::kOoDifferent) return pool_image;
  const auto& members = by_class_[static_cast<size_t>(dataset_->labels[static_cast<size_t>(pool_image)])];
  // Uniform over the class minus pool_image.
  int pick = members[rng.UniformInt(members.size() - 1)];
  if (pick == pool_image) pick = members.back();
  return pick;
}

GameRound GameSampler::SampleRound(Rng& rng) const {
  GameRound round;
  round.pool = SamplePool(rng);
  round.target = static_cast<int>(rng.UniformInt(round.pool.size()));
  round.sender_target = SenderFor(round.pool[static_cast<size_t>(round.target)], rng);
  if (dataset_->labeled()) {
    for (int idx : round.pool) round.labels.push_back(dataset_->labels[static_cast<size_t>(idx)]);
    round.sender_label = dataset_->labels[static_cast<size_t>(round.sender_target)];
  }
  return round;
}

GameBatch GameSampler::MakeBatch(Rng& rng, bool identity_permutation) const {
  GameBatch batch;
  batch.pool = SamplePool(rng);
  const int k1 = static_cast<int>(batch.pool.size());
  if (identity_permutation) {
    batch.permutation.resize(static_cast<size_t>(k1));
    std::iota(batch.permutation.begin(), batch.permutation.end(), 0);
  } else {
    batch.permutation = rng.Permutation(k1);
  }
  for (int slot : batch.permutation) {
    batch.sender_targets.push_back(SenderFor(batch.pool[static_cast<size_t>(slot)], rng));
  }
  if (dataset_->labeled()) {
    for (int idx : batch.pool) batch.labels.push_back(dataset_->labels[static_cast<size_t>(idx)]);
    for (int idx : batch.sender_targets) batch.sender_labels.push_back(dataset_->labels[static_cast<size_t>(idx)]);
  }
  return batch;
}

void CheckRound(const GameRound& round, GameVariant variant, int pool_size) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("round invariant: " + what); };
  if (static_cast<int>(round.pool.size()) != pool_size) fail("pool size");
  if (round.target < 0 || round.target >= pool_size) fail("target index out of range");
  if (std::set<int>(round.pool.begin(), round.pool.end()).size() != round.pool.size()) fail("repeated pool image");
  const int pool_target = round.pool[static_cast<size_t>(round.target)];
  if (variant == GameVariant::kOriginal || variant == GameVariant::kOoSame) {
    if (pool_target != round.sender_target) fail("pool[y] differs from the sender target");
  }
  if (variant == GameVariant::kOoSame || variant == GameVariant::kOoDifferent) {
    if (round.labels.size() != round.pool.size()) fail("missing labels");
    if (std::set<int>(round.labels.begin(), round.labels.end()).size() != round.labels.size()) {
      fail("pool labels not pairwise distinct");
    }
  }
  if (variant == GameVariant::kOoDifferent) {
    if (pool_target == round.sender_target) fail("pool[y] equals the sender target");
    if (round.labels[static_cast<size_t>(round.target)] != round.sender_label) fail("pool[y] class differs");
  }
}

double CommRate(std::span<const int> predictions, std::span<const int> targets) {
  if (predictions.size() != targets.size()) throw std::invalid_argument("comm_rate: length mismatch");
  if (predictions.empty()) return 0.0;
  size_t hits = 0;
  for (size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == targets[i];
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double ClassCommRate(std::span<const int> predictions, std::span<const int> targets,
                     const std::vector<std::vector<int>>& labels) {
  if (predictions.size() != targets.size() || labels.size() != predictions.size()) {
    throw std::invalid_argument("class_comm_rate: length mismatch");
  }
  if (predictions.empty()) return 0.0;
  size_t hits = 0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    const auto& l = labels[i];
    const auto p = static_cast<size_t>(predictions[i]), t = static_cast<size_t>(targets[i]);
    if (l.empty()) throw std::invalid_argument("class_comm_rate: round " + std::to_string(i) + " has no labels");
    if (p >= l.size() || t >= l.size()) throw std::invalid_argument("class_comm_rate: index outside pool");
    hits += l[p] == l[t];
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

void WriteRoundLog(std::ostream& out, GameVariant variant, const GameRound& round, int prediction) {
  nlohmann::json j = {{"variant", GameVariantName(variant)},
                      {"sender_target", round.sender_target},
                      {"pool", round.pool},
                      {"labels", round.labels},
                      {"target", round.target},
                      {"prediction", prediction}};
  out << j.dump() << '\n';
}

}  // namespace sketchcomm
