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

#ifndef SKETCHCOMM_TRAINER_HPP_
#define SKETCHCOMM_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "sketchcomm/adam.hpp"
#include "sketchcomm/agents.hpp"
#include "sketchcomm/checkpoint.hpp"
#include "sketchcomm/config.hpp"
#include "sketchcomm/game.hpp"

namespace sketchcomm {

class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(const std::string& what, nlohmann::json batch)
      : std::runtime_error(what), batch_(std::move(batch)) {}
  const nlohmann::json& batch() const { return batch_; }

 private:
  nlohmann::json batch_;
};

struct TrainState {
  int epoch = 0;  // completed epochs
  int64_t step = 0;
  uint64_t game_rng_position = 0;
};

struct StepStats {
  float loss = 0.0f;
  float game_loss = 0.0f;   // batch mean
  float perceptual = 0.0f;  // batch mean, 0 when disabled
  int correct = 0;
  int games = 0;
};

struct EvalMetrics {
  int games = 0;
  double comm_rate = 0.0;
  double class_comm_rate = 0.0;
  double loss = 0.0;
  double game_loss = 0.0;
  // Mean distance between each sketch and the sender's photo.
  double perceptual = 0.0;
  // Mean distance to the configured fixed image; equals `perceptual` for
  // the other targets.
  double target_perceptual = 0.0;

  nlohmann::json ToJson() const;
};

struct EpochMetrics {
  int epoch = 0;
  int64_t step = 0;
  double loss = 0.0;
  double game_loss = 0.0;
  double perceptual = 0.0;
  double train_comm_rate = 0.0;
  std::optional<EvalMetrics> eval;

  nlohmann::json ToJson() const;
};

struct EvalOptions {
  int games = 1000;
  uint64_t seed = 7;
  bool resize = false;  // rescale images whose size differs from the model's
};

// Backbone outputs for every image of a dataset, computed once. Only valid
// while the backbone is frozen.
class FeatureCache {
 public:
  void Build(const VisionEncoder& encoder, const Dataset& dataset, const NormStats& stats, bool with_taps);
  bool built() const { return !flat_.empty(); }
  Tensor Flat(const std::vector<int>& rows) const;
  std::vector<Tensor> Taps(const std::vector<int>& rows) const;

 private:
  int64_t flat_dim_ = 0;
  std::vector<float> flat_;
  std::vector<Shape> tap_shapes_;  // per-image [C, H, W]
  std::vector<std::vector<float>> taps_;
};

std::unique_ptr<AgentPair> BuildAgents(const TrainConfig& config, const NormStats& stats);

// Feature stack of a PNG resized to the model canvas, normalized like photos.
Tensor LoadTargetImage(const std::filesystem::path& path, const RasterConfig& raster, const NormStats& stats);

struct LoadedModel {
  TrainConfig config;
  NormStats stats;
  TrainState state;
  std::unique_ptr<AgentPair> agents;
  CheckpointData checkpoint;
};

LoadedModel LoadModel(const std::filesystem::path& checkpoint);

// Held-out metrics over freshly sampled rounds. No parameter is modified.
EvalMetrics Evaluate(const AgentPair& agents, const TrainConfig& config, const Dataset& dataset,
                     const EvalOptions& options);

// Per input image: photo_<i>.png, sketch_<i>.png, strokes_<i>.json.
void DumpSketches(const AgentPair& agents, const Dataset& images, const std::filesystem::path& out_dir);

class Trainer {
 public:
  Trainer(TrainConfig config, const DatasetSplits& data);
  // Resumes from a checkpoint written by Save().
  Trainer(const std::filesystem::path& checkpoint, const DatasetSplits& data);

  StepStats Step();
  StepStats StepOn(const GameBatch& batch);
  EpochMetrics RunEpoch(bool with_eval);
  // Runs the remaining epochs, writing metrics.jsonl, periodic checkpoints
  // and final.skcm under `out_dir`.
  void Train(const std::filesystem::path& out_dir);

  CheckpointData Snapshot() const;
  void Save(const std::filesystem::path& path) const;

  EvalMetrics EvaluateTest() const;

  const TrainConfig& config() const { return config_; }
  const NormStats& stats() const { return stats_; }
  const TrainState& state() const { return state_; }
  AgentPair& agents() { return *agents_; }
  const AgentPair& agents() const { return *agents_; }
  Adam& optimizer() { return *optimizer_; }
  const GameSampler& sampler() const { return *sampler_; }
  int steps_per_epoch() const;

 private:
  void Init();
  nlohmann::json BatchJson(const GameBatch& batch) const;

  TrainConfig config_;
  const DatasetSplits* data_;
  NormStats stats_;
  TrainState state_;
  std::unique_ptr<AgentPair> agents_;
  std::unique_ptr<Adam> optimizer_;
  std::unique_ptr<GameSampler> sampler_;
  std::unique_ptr<Rng> game_rng_;
  FeatureCache cache_;
  Tensor fixed_target_;  // normalized [1, 3, H, W]
  std::vector<Tensor> fixed_taps_;
};

}  // namespace sketchcomm

#endif  // SKETCHCOMM_TRAINER_HPP_
