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


// Small datasets and configs shared by the unit and acceptance suites.

#ifndef SKETCHCOMM_TESTS_FIXTURES_HPP_
#define SKETCHCOMM_TESTS_FIXTURES_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "sketchcomm/config.hpp"
#include "sketchcomm/dataset.hpp"
#include "sketchcomm/game.hpp"
#include "sketchcomm/service.hpp"

namespace sketchcomm::testing {

// 2x2 black images; image i has label labels[i]. Classes are named c0, c1, ...
Dataset LabeledDataset(const std::vector<int>& labels, int classes);

// `classes` classes with `per_class` images each.
Dataset BalancedDataset(int classes, int per_class);

// Synthetic 16x16 shapes with a two-block backbone: quick enough for
// per-step tests.
TrainConfig TinyConfig(uint64_t seed = 1);

// Fresh empty directory under the system temp dir.
std::filesystem::path ScratchDir(const std::string& name);

// Independent restatement of the round rules; returns "" when they hold.
std::string RoundViolation(const GameRound& round, const Dataset& data, GameVariant variant, int pool_size);

// Rounds of `candidates` images whose ids carry their class: "k<class>-<n>".
// Pool slot 0 and 1 share class 0; the rest have distinct classes. The
// target sits at pool slot `target_slot`.
class FixtureProvider : public RoundProvider {
 public:
  explicit FixtureProvider(int candidates = 10, int target_slot = 0)
      : candidates_(candidates), target_slot_(target_slot) {}
  std::vector<ProvidedRound> MakeRounds(const SessionSpec& spec, PngStore& images) override;

 private:
  int candidates_;
  int target_slot_;
};

// Class encoded in a fixture image id or URL.
int FixtureClass(const std::string& id_or_url);

// Plays a session to the end. plan[i] is 'c' (correct), 's' (wrong but same
// class) or 'w' (wrong class). Returns every response body in order.
std::vector<std::string> PlayScript(SessionStore& store, const std::string& token, const std::string& plan,
                                    double elapsed_ms = 1500.0);

}  // namespace sketchcomm::testing

#endif  // SKETCHCOMM_TESTS_FIXTURES_HPP_
