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

#include "sketchcomm/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace sketchcomm {

namespace {

std::string SourceName(DataSource s) {
  switch (s) {
    case DataSource::kSynthetic:
      return "synthetic";
    case DataSource::kStl10:
      return "stl10";
    case DataSource::kImageDir:
      return "image_dir";
  }
  return "unknown";
}

DataSource ParseSource(const std::string& name) {
  if (name == "synthetic") return DataSource::kSynthetic;
  if (name == "stl10") return DataSource::kStl10;
  if (name == "image_dir") return DataSource::kImageDir;
  throw ConfigError("data.source: unknown source '" + name + "'");
}

void CheckKeys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw ConfigError(where + ": expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void Read(const YAML::Node& node, const char* key, const std::string& where, T& out) {
  if (!node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception& e) {
    throw ConfigError(where + "." + key + ": " + e.msg);
  }
}

void ReadData(const YAML::Node& n, DataConfig& d) {
  CheckKeys(n, "data",
            {"source", "resolution", "train_path", "train_labels", "test_path", "test_labels", "synthetic"});
  std::string source = SourceName(d.source);
  Read(n, "source", "data", source);
  d.source = ParseSource(source);
  Read(n, "resolution", "data", d.resolution);
  Read(n, "train_path", "data", d.train_path);
  Read(n, "train_labels", "data", d.train_labels);
  Read(n, "test_path", "data", d.test_path);
  Read(n, "test_labels", "data", d.test_labels);
  if (const auto s = n["synthetic"]) {
    const std::string w = "data.synthetic";
    CheckKeys(s, w,
              {"classes", "resolution", "train_per_class", "test_per_class", "seed", "palette", "max_offset",
               "min_scale", "max_scale", "max_rotation", "min_thickness", "max_thickness"});
    auto& spec = d.synthetic;
    Read(s, "classes", w, spec.classes);
    Read(s, "resolution", w, spec.resolution);
    Read(s, "train_per_class", w, spec.train_per_class);
    Read(s, "test_per_class", w, spec.test_per_class);
    Read(s, "seed", w, spec.seed);
    std::string palette = spec.palette == Palette::kMono ? "mono" : "color";
    Read(s, "palette", w, palette);
    if (palette == "mono") {
      spec.palette = Palette::kMono;
    } else if (palette == "color") {
      spec.palette = Palette::kColor;
    } else {
      throw ConfigError(w + ".palette: expected mono or color");
    }
    Read(s, "max_offset", w, spec.max_offset);
    Read(s, "min_scale", w, spec.min_scale);
    Read(s, "max_scale", w, spec.max_scale);
    Read(s, "max_rotation", w, spec.max_rotation);
    Read(s, "min_thickness", w, spec.min_thickness);
    Read(s, "max_thickness", w, spec.max_thickness);
  }
}

void ReadModel(const YAML::Node& n, TrainConfig& c) {
  CheckKeys(n, "model",
            {"preset", "embed_dim", "blocks", "taps", "frozen", "sender_hidden", "receiver_hidden", "receiver_out"});
  std::string preset = "default";
  Read(n, "preset", "model", preset);
  if (preset == "wide") {
    ApplyWidePreset(c);
  } else if (preset != "default") {
    throw ConfigError("model.preset: expected default or wide");
  }
  Read(n, "embed_dim", "model", c.backbone.embed_dim);
  if (n["blocks"]) {
    std::vector<std::vector<int>> blocks;
    Read(n, "blocks", "model", blocks);
    c.backbone.blocks.clear();
    for (const auto& b : blocks) {
      if (b.size() != 2) throw ConfigError("model.blocks: each block is [out_channels, conv_count]");
      c.backbone.blocks.push_back({b[0], b[1]});
    }
  }
  Read(n, "taps", "model", c.backbone.taps);
  Read(n, "frozen", "model", c.backbone.frozen);
  if (n["sender_hidden"]) {
    std::vector<int> hidden;
    Read(n, "sender_hidden", "model", hidden);
    if (hidden.size() != 2) throw ConfigError("model.sender_hidden: expected two widths");
    c.agents.sender_hidden1 = hidden[0];
    c.agents.sender_hidden2 = hidden[1];
  }
  Read(n, "receiver_hidden", "model", c.agents.receiver_hidden);
  Read(n, "receiver_out", "model", c.agents.receiver_out);
}

}  // namespace

void TrainConfig::Validate() const {
  if (!(lr > 0.0f)) throw ConfigError("optim.lr: must be > 0");
  if (epochs < 1) throw ConfigError("train.epochs: must be >= 1");
  if (steps_per_epoch < 0) throw ConfigError("train.steps_per_epoch: must be >= 0");
  if (eval_every < 0 || checkpoint_every < 0) throw ConfigError("train: intervals must be >= 0");
  if (eval_games < 1) throw ConfigError("train.eval_games: must be >= 1");
  if (game.distractors < 1) throw ConfigError("game.distractors: must be >= 1");
  if (agents.strokes < 0) throw ConfigError("strokes.count: must be >= 0");
  int resolution = data.resolution;
  if (data.source == DataSource::kSynthetic) resolution = data.synthetic.resolution;
  if (data.source == DataSource::kStl10) resolution = kStl10Side;
  if (raster.width != resolution || raster.height != resolution) {
    throw ConfigError("raster: canvas " + std::to_string(raster.width) + "x" + std::to_string(raster.height) +
                      " does not match the " + std::to_string(resolution) + "px data");
  }
  try {
    raster.Validate();
    backbone.Validate(raster.height, raster.width);
    loss.Validate(backbone.taps.size());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void ApplyWidePreset(TrainConfig& config) {
  config.backbone.embed_dim = 1024;
  config.agents.receiver_hidden = 1024;
  config.agents.receiver_out = 1024;
}

TrainConfig ParseTrainConfig(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  TrainConfig c;
  if (root.IsNull()) return c;
  CheckKeys(root, "config", {"data", "game", "loss", "strokes", "raster", "model", "optim", "train"});
  if (const auto n = root["data"]) ReadData(n, c.data);
  if (const auto n = root["game"]) {
    CheckKeys(n, "game", {"variant", "distractors", "seed"});
    std::string variant = GameVariantName(c.game.variant);
    Read(n, "variant", "game", variant);
    try {
      c.game.variant = ParseGameVariant(variant);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("game.variant: ") + e.what());
    }
    Read(n, "distractors", "game", c.game.distractors);
    Read(n, "seed", "game", c.game.seed);
  }
  if (const auto n = root["model"]) ReadModel(n, c);
  if (const auto n = root["loss"]) {
    CheckKeys(n, "loss", {"weights", "lambda", "target", "fixed_image"});
    Read(n, "weights", "loss", c.loss.weights);
    Read(n, "lambda", "loss", c.loss.lambda);
    std::string target = PerceptualTargetName(c.loss.target);
    Read(n, "target", "loss", target);
    try {
      c.loss.target = ParsePerceptualTarget(target);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("loss.target: ") + e.what());
    }
    Read(n, "fixed_image", "loss", c.loss.fixed_image);
  }
  if (const auto n = root["strokes"]) {
    CheckKeys(n, "strokes", {"primitive", "count"});
    std::string primitive(PrimitiveName(c.agents.primitive));
    Read(n, "primitive", "strokes", primitive);
    try {
      c.agents.primitive = ParsePrimitive(primitive);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("strokes.primitive: ") + e.what());
    }
    Read(n, "count", "strokes", c.agents.strokes);
  }
  if (const auto n = root["raster"]) {
    CheckKeys(n, "raster", {"width", "height", "sigma2"});
    Read(n, "width", "raster", c.raster.width);
    Read(n, "height", "raster", c.raster.height);
    Read(n, "sigma2", "raster", c.raster.sigma2);
  }
  if (const auto n = root["optim"]) {
    CheckKeys(n, "optim", {"lr"});
    Read(n, "lr", "optim", c.lr);
  }
  if (const auto n = root["train"]) {
    CheckKeys(n, "train",
              {"epochs", "seed", "steps_per_epoch", "eval_every", "eval_games", "checkpoint_every", "out_dir"});
    Read(n, "epochs", "train", c.epochs);
    Read(n, "seed", "train", c.seed);
    Read(n, "steps_per_epoch", "train", c.steps_per_epoch);
    Read(n, "eval_every", "train", c.eval_every);
    Read(n, "eval_games", "train", c.eval_games);
    Read(n, "checkpoint_every", "train", c.checkpoint_every);
    Read(n, "out_dir", "train", c.out_dir);
  }
  c.Validate();
  return c;
}

TrainConfig LoadTrainConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseTrainConfig(ss.str());
}

std::string DumpTrainConfig(const TrainConfig& c) {
  YAML::Emitter e;
  e.SetFloatPrecision(9);
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;

  e << YAML::Key << "data" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "source" << YAML::Value << SourceName(c.data.source);
  e << YAML::Key << "resolution" << YAML::Value << c.data.resolution;
  e << YAML::Key << "train_path" << YAML::Value << c.data.train_path;
  e << YAML::Key << "train_labels" << YAML::Value << c.data.train_labels;
  e << YAML::Key << "test_path" << YAML::Value << c.data.test_path;
  e << YAML::Key << "test_labels" << YAML::Value << c.data.test_labels;
  const auto& s = c.data.synthetic;
  e << YAML::Key << "synthetic" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "classes" << YAML::Value << YAML::Flow << s.classes;
  e << YAML::Key << "resolution" << YAML::Value << s.resolution;
  e << YAML::Key << "train_per_class" << YAML::Value << s.train_per_class;
  e << YAML::Key << "test_per_class" << YAML::Value << s.test_per_class;
  e << YAML::Key << "seed" << YAML::Value << s.seed;
  e << YAML::Key << "palette" << YAML::Value << (s.palette == Palette::kMono ? "mono" : "color");
  e << YAML::Key << "max_offset" << YAML::Value << s.max_offset;
  e << YAML::Key << "min_scale" << YAML::Value << s.min_scale;
  e << YAML::Key << "max_scale" << YAML::Value << s.max_scale;
  e << YAML::Key << "max_rotation" << YAML::Value << s.max_rotation;
  e << YAML::Key << "min_thickness" << YAML::Value << s.min_thickness;
  e << YAML::Key << "max_thickness" << YAML::Value << s.max_thickness;
  e << YAML::EndMap << YAML::EndMap;

  e << YAML::Key << "game" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "variant" << YAML::Value << GameVariantName(c.game.variant);
  e << YAML::Key << "distractors" << YAML::Value << c.game.distractors;
  e << YAML::Key << "seed" << YAML::Value << c.game.seed;
  e << YAML::EndMap;

  e << YAML::Key << "loss" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "weights" << YAML::Value << YAML::Flow << c.loss.weights;
  e << YAML::Key << "lambda" << YAML::Value << c.loss.lambda;
  e << YAML::Key << "target" << YAML::Value << PerceptualTargetName(c.loss.target);
  e << YAML::Key << "fixed_image" << YAML::Value << c.loss.fixed_image;
  e << YAML::EndMap;

  e << YAML::Key << "strokes" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "primitive" << YAML::Value << std::string(PrimitiveName(c.agents.primitive));
  e << YAML::Key << "count" << YAML::Value << c.agents.strokes;
  e << YAML::EndMap;

  e << YAML::Key << "raster" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "width" << YAML::Value << c.raster.width;
  e << YAML::Key << "height" << YAML::Value << c.raster.height;
  e << YAML::Key << "sigma2" << YAML::Value << c.raster.sigma2;
  e << YAML::EndMap;

  e << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "embed_dim" << YAML::Value << c.backbone.embed_dim;
  e << YAML::Key << "blocks" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& b : c.backbone.blocks) e << YAML::Flow << std::vector<int>{b.out_channels, b.conv_count};
  e << YAML::EndSeq;
  e << YAML::Key << "taps" << YAML::Value << YAML::Flow << c.backbone.taps;
  e << YAML::Key << "frozen" << YAML::Value << c.backbone.frozen;
  e << YAML::Key << "sender_hidden" << YAML::Value << YAML::Flow
    << std::vector<int>{c.agents.sender_hidden1, c.agents.sender_hidden2};
  e << YAML::Key << "receiver_hidden" << YAML::Value << c.agents.receiver_hidden;
  e << YAML::Key << "receiver_out" << YAML::Value << c.agents.receiver_out;
  e << YAML::EndMap;

  e << YAML::Key << "optim" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "lr" << YAML::Value << c.lr;
  e << YAML::EndMap;

  e << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "epochs" << YAML::Value << c.epochs;
  e << YAML::Key << "seed" << YAML::Value << c.seed;
  e << YAML::Key << "steps_per_epoch" << YAML::Value << c.steps_per_epoch;
  e << YAML::Key << "eval_every" << YAML::Value << c.eval_every;
  e << YAML::Key << "eval_games" << YAML::Value << c.eval_games;
  e << YAML::Key << "checkpoint_every" << YAML::Value << c.checkpoint_every;
  e << YAML::Key << "out_dir" << YAML::Value << c.out_dir;
  e << YAML::EndMap;

  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

DatasetSplits LoadData(const DataConfig& config) {
  switch (config.source) {
    case DataSource::kSynthetic:
      return GenerateSynthetic(config.synthetic);
    case DataSource::kStl10: {
      auto opt = [](const std::string& p) {
        return p.empty() ? std::nullopt : std::optional<std::filesystem::path>(p);
      };
      DatasetSplits s{LoadStl10(config.train_path, opt(config.train_labels)),
                      LoadStl10(config.test_path, opt(config.test_labels))};
      s.test.split = "test";
      return s;
    }
    case DataSource::kImageDir: {
      DatasetSplits s{LoadImageDir(config.train_path, config.resolution),
                      LoadImageDir(config.test_path, config.resolution)};
      s.test.split = "test";
      return s;
    }
  }
  throw ConfigError("data.source: unsupported");
}

}  // namespace sketchcomm
