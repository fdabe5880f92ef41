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

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "sketchcomm/config.hpp"
#include "sketchcomm/dataset.hpp"
#include "sketchcomm/service.hpp"
#include "sketchcomm/trainer.hpp"

namespace fs = std::filesystem;
using namespace sketchcomm;

namespace {

int GenData(const std::string& out, const SyntheticSpec& spec, const std::string& format) {
  DatasetSplits splits = GenerateSynthetic(spec);
  fs::create_directories(out);
  if (format == "stl10") {
    if (spec.resolution != kStl10Side) throw std::invalid_argument("stl10 format needs --resolution 96");
    WriteStl10(splits.train, fs::path(out) / "train_X.bin", fs::path(out) / "train_y.bin");
    WriteStl10(splits.test, fs::path(out) / "test_X.bin", fs::path(out) / "test_y.bin");
  } else {
    WriteImageDir(splits.train, fs::path(out) / "train");
    WriteImageDir(splits.test, fs::path(out) / "test");
  }
  WriteManifest(fs::path(out) / "manifest.json", splits, ComputeStats(splits.train), &spec);
  spdlog::info("wrote {} train and {} test images to {}", splits.train.size(), splits.test.size(), out);
  return 0;
}

Dataset PickSplit(const DatasetSplits& splits, const std::string& split) {
  if (split == "train") return splits.train;
  if (split == "test") return splits.test;
  throw std::invalid_argument("unknown split '" + split + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sketch-based referential games: data, training, evaluation and the human-study service"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic shapes dataset");
  SyntheticSpec spec;
  std::string gen_out = "data/shapes", gen_format = "image_dir", palette = "mono";
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--format", gen_format, "image_dir or stl10")->check(CLI::IsMember({"image_dir", "stl10"}));
  gen->add_option("--resolution", spec.resolution, "Image side in pixels");
  gen->add_option("--train-per-class", spec.train_per_class);
  gen->add_option("--test-per-class", spec.test_per_class);
  gen->add_option("--seed", spec.seed);
  gen->add_option("--palette", palette)->check(CLI::IsMember({"mono", "color"}));

  auto* train = app.add_subcommand("train", "Train a sender/receiver pair");
  std::string train_config, resume, train_out;
  int epochs_override = 0;
  train->add_option("--config", train_config, "YAML config")->check(CLI::ExistingFile);
  train->add_option("--resume", resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "Run directory (overrides train.out_dir)");
  train->add_option("--epochs", epochs_override, "Override train.epochs");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on held-out games");
  std::string eval_ckpt, eval_config, eval_split = "test";
  EvalOptions eval_options;
  eval->add_option("--checkpoint", eval_ckpt)->required()->check(CLI::ExistingFile);
  eval->add_option("--data-config", eval_config, "YAML whose data section names another dataset")
      ->check(CLI::ExistingFile);
  eval->add_option("--split", eval_split)->check(CLI::IsMember({"train", "test"}));
  eval->add_option("--games", eval_options.games);
  eval->add_option("--seed", eval_options.seed);
  eval->add_flag("--resize", eval_options.resize, "Rescale images to the model's resolution");

  auto* sketch = app.add_subcommand("sketch", "Write sketches for a set of images");
  std::string sketch_ckpt, sketch_out = "sketches", sketch_split = "test", sketch_dir;
  int sketch_count = 10;
  sketch->add_option("--checkpoint", sketch_ckpt)->required()->check(CLI::ExistingFile);
  sketch->add_option("--out", sketch_out);
  sketch->add_option("--images", sketch_dir, "Directory of PNGs (default: the checkpoint's data split)");
  sketch->add_option("--split", sketch_split)->check(CLI::IsMember({"train", "test"}));
  sketch->add_option("--count", sketch_count);

  auto* serve = app.add_subcommand("serve", "Run the human evaluation service");
  ServiceOptions serve_options;
  serve->add_option("--checkpoint", serve_options.checkpoint, "Default checkpoint for new sessions");
  serve->add_option("--static-dir", serve_options.static_dir, "Directory served at /");
  serve->add_option("--store", serve_options.store_path, "Event log (or SKETCHCOMM_STORE_PATH)");
  serve->add_option("--bind", serve_options.bind, "host:port (or SKETCHCOMM_BIND)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      spec.palette = palette == "mono" ? Palette::kMono : Palette::kColor;
      return GenData(gen_out, spec, gen_format);
    }
    if (train->parsed()) {
      if (!resume.empty()) {
        auto splits = LoadData(LoadModel(resume).config.data);
        Trainer trainer(fs::path(resume), splits);
        trainer.Train(train_out.empty() ? fs::path(trainer.config().out_dir) : fs::path(train_out));
        return 0;
      }
      TrainConfig config = train_config.empty() ? TrainConfig{} : LoadTrainConfig(train_config);
      if (epochs_override > 0) config.epochs = epochs_override;
      if (!train_out.empty()) config.out_dir = train_out;
      config.Validate();
      auto splits = LoadData(config.data);
      Trainer trainer(config, splits);
      trainer.Train(config.out_dir);
      return 0;
    }
    if (eval->parsed()) {
      LoadedModel model = LoadModel(eval_ckpt);
      DataConfig data = model.config.data;
      if (!eval_config.empty()) data = LoadTrainConfig(eval_config).data;
      DatasetSplits splits = LoadData(data);
      EvalMetrics m = Evaluate(*model.agents, model.config, PickSplit(splits, eval_split), eval_options);
      std::cout << m.ToJson().dump(2) << std::endl;
      return 0;
    }
    if (sketch->parsed()) {
      LoadedModel model = LoadModel(sketch_ckpt);
      Dataset images;
      if (!sketch_dir.empty()) {
        images = LoadImageDir(sketch_dir, model.config.raster.width);
      } else {
        images = PickSplit(LoadData(model.config.data), sketch_split);
      }
      Dataset subset;
      subset.width = images.width;
      subset.height = images.height;
      for (size_t i = 0; i < images.size() && static_cast<int>(i) < sketch_count; ++i) {
        subset.Append(images.image(i), std::nullopt);
      }
      DumpSketches(*model.agents, subset, sketch_out);
      spdlog::info("wrote {} sketches to {}", subset.size(), sketch_out);
      return 0;
    }
    if (serve->parsed()) {
      return RunService(serve_options);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
