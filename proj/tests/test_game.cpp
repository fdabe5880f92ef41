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


#include <doctest.h>

#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "sketchcomm/game.hpp"
#include "sketchcomm/rng.hpp"

using namespace sketchcomm;
using namespace sketchcomm::testing;

TEST_CASE("10k rounds per variant satisfy the round rules") {
  const Dataset data = BalancedDataset(12, 5);
  for (auto variant : {GameVariant::kOriginal, GameVariant::kOoSame, GameVariant::kOoDifferent}) {
    GameConfig cfg{variant, 9, 3};
    GameSampler sampler(data, cfg);
    Rng rng(3, 1);
    for (int i = 0; i < 10000; ++i) {
      const GameRound r = sampler.SampleRound(rng);
      REQUIRE(RoundViolation(r, data, variant, 10) == "");
      CHECK_NOTHROW(CheckRound(r, variant, 10));
    }
  }
}

TEST_CASE("pool shapes at the feasibility edge") {
  SUBCASE("original on a 10-image dataset uses every image") {
    const Dataset data = BalancedDataset(1, 10);
    GameSampler sampler(data, GameConfig{GameVariant::kOriginal, 9, 1});
    Rng rng(1, 0);
    auto pool = sampler.SampleRound(rng).pool;
    CHECK(std::set<int>(pool.begin(), pool.end()).size() == 10);
  }
  SUBCASE("oo_same on 10 classes covers each class once") {
    const Dataset data = BalancedDataset(10, 3);
    GameSampler sampler(data, GameConfig{GameVariant::kOoSame, 9, 1});
    Rng rng(1, 0);
    auto labels = sampler.SampleRound(rng).labels;
    CHECK(std::set<int>(labels.begin(), labels.end()).size() == 10);
  }
}

TEST_CASE("infeasible games are diagnosed") {
  CHECK_THROWS_WITH_AS(GameSampler(BalancedDataset(1, 5), GameConfig{GameVariant::kOriginal, 9, 1}),
                       doctest::Contains("exceeds dataset size 5"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(GameSampler(BalancedDataset(5, 5), GameConfig{GameVariant::kOoSame, 9, 1}),
                       doctest::Contains("5 populated classes"), std::invalid_argument);
  Dataset one = LabeledDataset({0, 0, 1, 2, 2}, 3);
  CHECK_THROWS_WITH_AS(GameSampler(one, GameConfig{GameVariant::kOoDifferent, 2, 1}),
                       doctest::Contains("class 'c1'"), std::invalid_argument);
  Dataset unlabeled = BalancedDataset(3, 3);
  unlabeled.labels.clear();
  CHECK_THROWS_AS(GameSampler(unlabeled, GameConfig{GameVariant::kOoSame, 2, 1}), std::invalid_argument);
  CHECK_THROWS_AS(GameSampler(BalancedDataset(3, 3), GameConfig{GameVariant::kOriginal, 0, 1}), std::invalid_argument);
}

TEST_CASE("fixed seed reproduces the round stream") {
  const Dataset data = BalancedDataset(10, 4);
  GameSampler sampler(data, GameConfig{GameVariant::kOoDifferent, 9, 1});
  Rng a(42, 11), b(42, 11);
  for (int i = 0; i < 500; ++i) {
    const GameRound x = sampler.SampleRound(a), y = sampler.SampleRound(b);
    REQUIRE(x.pool == y.pool);
    REQUIRE(x.target == y.target);
    REQUIRE(x.sender_target == y.sender_target);
  }
}

TEST_CASE("batches hold K+1 games with a resampled permutation") {
  const Dataset data = BalancedDataset(10, 4);
  GameSampler sampler(data, GameConfig{GameVariant::kOoDifferent, 9, 1});
  Rng rng(5, 0);
  const GameBatch first = sampler.MakeBatch(rng);
  const GameBatch second = sampler.MakeBatch(rng);
  CHECK(first.size() == 10);
  CHECK(first.permutation != second.permutation);
  std::vector<int> sorted = first.permutation;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 10; ++i) CHECK(sorted[static_cast<size_t>(i)] == i);
  for (size_t i = 0; i < first.size(); ++i) {
    CHECK(RoundViolation(first.Round(i), data, GameVariant::kOoDifferent, 10) == "");
  }

  const GameBatch fixed = sampler.MakeBatch(rng, true);
  for (size_t i = 0; i < fixed.size(); ++i) {
    CHECK(fixed.permutation[i] == static_cast<int>(i));
    CHECK(fixed.Round(i).target == static_cast<int>(i));
  }
}

TEST_CASE("communication rates on fixtures") {
  std::vector<int> all(10, 2);
  CHECK(CommRate(all, all) == 1.0);
  std::vector<int> preds{0, 1, 2, 0, 0, 0, 0, 0, 0, 0}, targets{0, 1, 2, 3, 3, 3, 3, 3, 3, 3};
  CHECK(CommRate(preds, targets) == doctest::Approx(0.3));

  // 30 rounds: 12 exact hits, 6 same-class misses, 12 misses.
  std::vector<int> p, t;
  std::vector<std::vector<int>> labels;
  for (int i = 0; i < 30; ++i) {
    t.push_back(0);
    labels.push_back({0, 0, 1, 2});
    p.push_back(i < 12 ? 0 : i < 18 ? 1 : 2 + i % 2);
  }
  CHECK(CommRate(p, t) == doctest::Approx(0.4));
  CHECK(ClassCommRate(p, t, labels) == doctest::Approx(0.6));

  // Distinct classes: the two rates coincide.
  std::vector<std::vector<int>> distinct(30, std::vector<int>{0, 1, 2, 3});
  CHECK(ClassCommRate(p, t, distinct) == CommRate(p, t));
  CHECK(CommRate(std::vector<int>{}, std::vector<int>{}) == 0.0);
}

TEST_CASE("class rate never falls below the exact rate") {
  Rng rng(9, 0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> p, t;
    std::vector<std::vector<int>> labels;
    for (int i = 0; i < 25; ++i) {
      std::vector<int> l(6);
      for (int& v : l) v = static_cast<int>(rng.UniformInt(3));
      labels.push_back(l);
      p.push_back(static_cast<int>(rng.UniformInt(6)));
      t.push_back(static_cast<int>(rng.UniformInt(6)));
    }
    CHECK(ClassCommRate(p, t, labels) >= CommRate(p, t));
  }
}

TEST_CASE("a uniform random guesser sits at chance") {
  Rng rng(10, 0);
  std::vector<int> p, t;
  for (int i = 0; i < 20000; ++i) {
    p.push_back(static_cast<int>(rng.UniformInt(10)));
    t.push_back(static_cast<int>(rng.UniformInt(10)));
  }
  CHECK(std::abs(CommRate(p, t) - 0.10) < 0.01);
}

TEST_CASE("round log line") {
  GameRound r{4, {7, 4, 9}, 1, {2, 0, 1}, 0};
  std::ostringstream os;
  WriteRoundLog(os, GameVariant::kOoSame, r, 2);
  const auto j = nlohmann::json::parse(os.str());
  CHECK(j["variant"] == "oo_same");
  CHECK(j["prediction"] == 2);
  CHECK(j["pool"] == nlohmann::json({7, 4, 9}));
  CHECK(os.str().back() == '\n');
}

TEST_CASE("variant names round-trip") {
  for (auto v : {GameVariant::kOriginal, GameVariant::kOoSame, GameVariant::kOoDifferent}) {
    CHECK(ParseGameVariant(GameVariantName(v)) == v);
  }
  CHECK_THROWS(ParseGameVariant("oo"));
}
