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


#include "fixtures.hpp"

#include <unistd.h>

#include <nlohmann/json.hpp>
#include <set>
#include <stdexcept>

#include "sketchcomm/image.hpp"

namespace sketchcomm::testing {

Dataset LabeledDataset(const std::vector<int>& labels, int classes) {
  Dataset d;
  d.width = 2;
  d.height = 2;
  for (int c = 0; c < classes; ++c) d.class_names.push_back("c" + std::to_string(c));
  for (int label : labels) d.Append(Image{2, 2, 3, std::vector<uint8_t>(12, 0)}, label);
  return d;
}

Dataset BalancedDataset(int classes, int per_class) {
  std::vector<int> labels;
  for (int c = 0; c < classes; ++c) {
    for (int k = 0; k < per_class; ++k) labels.push_back(c);
  }
  return LabeledDataset(labels, classes);
}

TrainConfig TinyConfig(uint64_t seed) {
  TrainConfig c;
  c.data.synthetic.resolution = 16;
  c.data.synthetic.train_per_class = 6;
  c.data.synthetic.test_per_class = 4;
  c.data.synthetic.seed = seed;
  c.data.resolution = 16;
  c.raster.width = 16;
  c.raster.height = 16;
  c.raster.sigma2 = 2e-3f;
  c.backbone.blocks = {{4, 1}, {8, 1}};
  c.backbone.taps = {0, 1};
  c.backbone.embed_dim = 16;
  c.loss.weights = {1, 1};
  c.agents.strokes = 4;
  c.agents.sender_hidden1 = 16;
  c.agents.sender_hidden2 = 32;
  c.agents.receiver_hidden = 16;
  c.agents.receiver_out = 16;
  c.game.distractors = 3;
  c.game.seed = seed;
  c.seed = seed;
  c.lr = 1e-3f;
  c.epochs = 2;
  c.steps_per_epoch = 3;
  c.eval_every = 1;
  c.eval_games = 40;
  c.Validate();
  return c;
}

std::filesystem::path ScratchDir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("sketchcomm-test-" + std::to_string(::getpid()) + "-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string RoundViolation(const GameRound& round, const Dataset& data, GameVariant variant, int pool_size) {
  if (static_cast<int>(round.pool.size()) != pool_size) return "pool size";
  if (round.target < 0 || round.target >= pool_size) return "target range";
  std::set<int> images, classes;
  for (int idx : round.pool) {
    if (idx < 0 || static_cast<size_t>(idx) >= data.size()) return "pool index outside dataset";
    images.insert(idx);
    if (data.labeled()) classes.insert(data.labels[static_cast<size_t>(idx)]);
  }
  if (images.size() != round.pool.size()) return "duplicate pool image";
  const int y = round.pool[static_cast<size_t>(round.target)];
  switch (variant) {
    case GameVariant::kOriginal:
      if (y != round.sender_target) return "original: pool[y] != sender target";
      break;
    case GameVariant::kOoSame:
      if (classes.size() != round.pool.size()) return "oo_same: repeated class";
      if (y != round.sender_target) return "oo_same: pool[y] != sender target";
      break;
    case GameVariant::kOoDifferent:
      if (classes.size() != round.pool.size()) return "oo_different: repeated class";
      if (y == round.sender_target) return "oo_different: pool[y] == sender target";
      if (data.labels[static_cast<size_t>(y)] != data.labels[static_cast<size_t>(round.sender_target)]) {
        return "oo_different: class mismatch";
      }
      break;
  }
  if (data.labeled()) {
    for (size_t k = 0; k < round.pool.size(); ++k) {
      if (round.labels.size() != round.pool.size() ||
          round.labels[k] != data.labels[static_cast<size_t>(round.pool[k])]) {
        return "labels do not match the pool";
      }
    }
  }
  return "";
}

std::vector<ProvidedRound> FixtureProvider::MakeRounds(const SessionSpec& spec, PngStore& images) {
  const std::vector<uint8_t> png = EncodePng(Image{2, 2, 3, std::vector<uint8_t>(12, 128)});
  std::vector<ProvidedRound> rounds;
  for (int r = 0; r < spec.rounds; ++r) {
    ProvidedRound round;
    round.sketch_id = "sketch-" + std::to_string(r);
    images[round.sketch_id] = png;
    for (int k = 0; k < candidates_; ++k) {
      const int cls = k < 2 ? 0 : k - 1;
      round.candidate_ids.push_back("k" + std::to_string(cls) + "-" + std::to_string(r * candidates_ + k));
      round.labels.push_back(cls);
      images[round.candidate_ids.back()] = png;
    }
    round.target = target_slot_;
    rounds.push_back(round);
  }
  return rounds;
}

int FixtureClass(const std::string& id_or_url) {
  const size_t at = id_or_url.rfind("/k") != std::string::npos ? id_or_url.rfind("/k") + 2 : 1;
  return std::stoi(id_or_url.substr(at, id_or_url.find('-', at) - at));
}

std::vector<std::string> PlayScript(SessionStore& store, const std::string& token, const std::string& plan,
                                    double elapsed_ms) {
  std::vector<std::string> bodies;
  for (size_t i = 0; i < plan.size(); ++i) {
    const int index = static_cast<int>(i);
    const ApiResponse round = store.GetRound(token, index);
    if (round.status != 200) throw std::runtime_error("round " + std::to_string(i) + ": " + round.body);
    bodies.push_back(round.body);
    const auto urls = nlohmann::json::parse(round.body)["candidates"].get<std::vector<std::string>>();
    const int target = *store.TargetOf(token, index);
    const int target_class = FixtureClass(urls[static_cast<size_t>(target)]);
    int guess = -1;
    for (int k = 0; k < static_cast<int>(urls.size()) && guess < 0; ++k) {
      const bool same = FixtureClass(urls[static_cast<size_t>(k)]) == target_class;
      if ((plan[i] == 'c' && k == target) || (plan[i] == 's' && same && k != target) || (plan[i] == 'w' && !same)) {
        guess = k;
      }
    }
    if (guess < 0) throw std::runtime_error("script: no candidate fits '" + std::string(1, plan[i]) + "'");
    const ApiResponse r = store.SubmitGuess(token, {{"index", index}, {"guess", guess}, {"elapsed_ms", elapsed_ms}});
    if (r.status != 200) throw std::runtime_error("guess " + std::to_string(i) + ": " + r.body);
    bodies.push_back(r.body);
  }
  return bodies;
}

}  // namespace sketchcomm::testing
