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

#ifndef SKETCHCOMM_CONFIG_HPP_
#define SKETCHCOMM_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "sketchcomm/agents.hpp"
#include "sketchcomm/dataset.hpp"
#include "sketchcomm/encoder.hpp"
#include "sketchcomm/game.hpp"
#include "sketchcomm/losses.hpp"
#include "sketchcomm/raster.hpp"

namespace sketchcomm {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DataSource { kSynthetic, kStl10, kImageDir };

struct DataConfig {
  DataSource source = DataSource::kSynthetic;
  SyntheticSpec synthetic;
  // stl10: binary files; image_dir: directories of class subfolders.
  std::string train_path;
  std::string train_labels;
  std::string test_path;
  std::string test_labels;
  int resolution = 48;  // image_dir only; stl10 is 96 and synthetic uses its own
};

struct TrainConfig {
  DataConfig data;
  GameConfig game;
  LossConfig loss;
  AgentConfig agents;
  BackboneConfig backbone;
  RasterConfig raster;
  float lr = 1e-4f;
  int epochs = 100;
  uint64_t seed = 1;
  int steps_per_epoch = 0;  // 0: ceil(train size / (K+1))
  int eval_every = 10;      // epochs; 0 disables periodic eval
  int eval_games = 1000;
  int checkpoint_every = 0;  // epochs; 0 keeps only the final checkpoint
  std::string out_dir = "runs/default";

  // Throws ConfigError naming the offending key.
  void Validate() const;
};

// The embedding and receiver widths of the large configuration.
void ApplyWidePreset(TrainConfig& config);

TrainConfig LoadTrainConfig(const std::filesystem::path& path);
// Parses and validates; throws ConfigError.
TrainConfig ParseTrainConfig(const std::string& yaml_text);
std::string DumpTrainConfig(const TrainConfig& config);

// Loads the data splits named by the config.
DatasetSplits LoadData(const DataConfig& config);

}  // namespace sketchcomm

#endif  // SKETCHCOMM_CONFIG_HPP_
