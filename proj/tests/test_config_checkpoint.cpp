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

#include <cstring>
#include <fstream>

#include "fixtures.hpp"
#include "sketchcomm/checkpoint.hpp"
#include "sketchcomm/config.hpp"

using namespace sketchcomm;
using namespace sketchcomm::testing;

TEST_CASE("config: dump and parse are inverse") {
  TrainConfig c = TinyConfig();
  c.loss.lambda = 0.25f;
  c.game.variant = GameVariant::kOriginal;
  c.agents.primitive = Primitive::kPoint;
  c.lr = 3.3e-4f;
  const std::string text = DumpTrainConfig(c);
  const TrainConfig back = ParseTrainConfig(text);
  CHECK(DumpTrainConfig(back) == text);
  CHECK(back.lr == c.lr);
  CHECK(back.loss.lambda == 0.25f);
  CHECK(back.agents.primitive == Primitive::kPoint);
  CHECK(back.backbone.blocks.size() == 2);
  CHECK(back.data.synthetic.resolution == 16);
}

TEST_CASE("config: defaults match the desk setup") {
  const TrainConfig c = ParseTrainConfig("{}");
  CHECK(c.game.variant == GameVariant::kOoDifferent);
  CHECK(c.game.distractors == 9);
  CHECK(c.agents.strokes == 20);
  CHECK(c.agents.primitive == Primitive::kLine);
  CHECK(c.backbone.embed_dim == 64);
  CHECK(c.backbone.taps.size() == 4);
  CHECK(c.loss.lambda == 1.0f);
  CHECK(c.lr == 1e-4f);
  CHECK(c.epochs == 100);
  CHECK(c.data.synthetic.resolution == 48);
  CHECK(c.data.synthetic.train_per_class == 200);
  CHECK(c.data.synthetic.test_per_class == 50);
}

TEST_CASE("config: unknown keys and bad values name the key") {
  CHECK_THROWS_WITH_AS(ParseTrainConfig("game: {distractor: 3}"), doctest::Contains("distractor"), ConfigError);
  CHECK_THROWS_WITH_AS(ParseTrainConfig("optim: {lr: 0}"), doctest::Contains("optim.lr"), ConfigError);
  CHECK_THROWS_WITH_AS(ParseTrainConfig("game: {variant: mixed}"), doctest::Contains("mixed"), ConfigError);
  CHECK_THROWS_AS(ParseTrainConfig("raster: {width: 32}"), ConfigError);
  CHECK_THROWS_AS(ParseTrainConfig("loss: {weights: [1, 1]}"), ConfigError);
  CHECK_THROWS_AS(ParseTrainConfig("model: {preset: huge}"), ConfigError);
  CHECK_THROWS_AS(ParseTrainConfig("game: [1, 2]"), ConfigError);
}

TEST_CASE("config: wide preset") {
  const TrainConfig c = ParseTrainConfig("model: {preset: wide}");
  CHECK(c.backbone.embed_dim == 1024);
  CHECK(c.agents.receiver_hidden == 1024);
  CHECK(c.agents.receiver_out == 1024);
}

TEST_CASE("config: files load and missing fixed images fail at startup") {
  const auto dir = ScratchDir("config");
  {
    std::ofstream out(dir / "c.yaml");
    out << "loss: {lambda: 0.5}\ntrain: {epochs: 3}\n";
  }
  const TrainConfig c = LoadTrainConfig(dir / "c.yaml");
  CHECK(c.loss.lambda == 0.5f);
  CHECK(c.epochs == 3);
  CHECK_THROWS_AS(LoadTrainConfig(dir / "absent.yaml"), ConfigError);
  CHECK_THROWS_AS(ParseTrainConfig("loss: {target: fixed_image}"), ConfigError);
}

TEST_CASE("checkpoint: encode/decode round-trip is exact") {
  CheckpointData data;
  data.metadata = {{"epoch", 3}, {"note", "x"}};
  data.tensors["a"] = Tensor::FromData({2, 3}, {1.5f, -0.0f, 3e-38f, 1e30f, -7.25f, 0.1f});
  data.tensors["empty"] = Tensor::Zeros({0, 4});
  data.tensors["scalar"] = Tensor::Scalar(2.0f);
  const std::string bytes = EncodeCheckpoint(data);
  CHECK(bytes.substr(0, 4) == "SKCM");
  const CheckpointData back = DecodeCheckpoint(bytes);
  CHECK(back.metadata == data.metadata);
  REQUIRE(back.tensors.size() == 3);
  for (const auto& [name, t] : data.tensors) {
    const Tensor& u = back.tensors.at(name);
    CHECK(u.shape() == t.shape());
    CHECK(std::memcmp(u.data().data(), t.data().data(), t.data().size_bytes()) == 0);
  }
  CHECK(EncodeCheckpoint(back) == bytes);

  const auto dir = ScratchDir("ckpt");
  SaveCheckpointFile(dir / "c.skcm", data);
  CHECK(EncodeCheckpoint(LoadCheckpointFile(dir / "c.skcm")) == bytes);
  CHECK_FALSE(std::filesystem::exists(dir / "c.skcm.tmp"));
}

TEST_CASE("checkpoint: corrupt files are rejected with positions") {
  CheckpointData data;
  data.metadata = {{"k", 1}};
  data.tensors["w"] = Tensor::Full({4}, 1.0f);
  const std::string bytes = EncodeCheckpoint(data);
  CHECK_THROWS_WITH_AS(DecodeCheckpoint(bytes.substr(0, bytes.size() - 3)), doctest::Contains("at byte"),
                       CheckpointError);
  const std::string trailing = "trailing bytes at " + std::to_string(bytes.size());
  CHECK_THROWS_WITH_AS(DecodeCheckpoint(bytes + "x"), doctest::Contains(trailing.c_str()), CheckpointError);
  std::string magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_WITH_AS(DecodeCheckpoint(magic), doctest::Contains("bad magic"), CheckpointError);
  std::string version = bytes;
  version[4] = 9;
  CHECK_THROWS_WITH_AS(DecodeCheckpoint(version), doctest::Contains("version 9"), CheckpointError);
  CHECK_THROWS_AS(DecodeCheckpoint(""), CheckpointError);
  CHECK_THROWS_AS(LoadCheckpointFile("/nonexistent/x.skcm"), CheckpointError);
}
