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

#include "sketchcomm/trainer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>

#include "sketchcomm/image.hpp"
#include "sketchcomm/losses.hpp"
#include "sketchcomm/ops.hpp"

namespace sketchcomm {

namespace fs = std::filesystem;

namespace {

constexpr int kChunk = 32;
constexpr uint64_t kGameStream = 11;
constexpr uint64_t kEvalStream = 3;

bool NeedsMatchedTaps(const LossConfig& loss) {
  return loss.perceptual_enabled() && loss.target == PerceptualTarget::kMatchedPhoto;
}

std::vector<float> Row(const Tensor& t, int64_t row) {
  const int64_t per = t.numel() / t.dim(0);
  auto d = t.data().subspan(static_cast<size_t>(row * per), static_cast<size_t>(per));
  return {d.begin(), d.end()};
}

Dataset Resized(const Dataset& src, int width, int height) {
  Dataset out;
  out.width = width;
  out.height = height;
  out.class_names = src.class_names;
  out.split = src.split;
  for (size_t i = 0; i < src.size(); ++i) {
    Image img = ResizeBilinear(src.image(i), width, height);
    out.Append(img, src.labeled() ? std::optional<int>(src.labels[i]) : std::nullopt);
  }
  return out;
}

// Copies stored values into existing tensors, checking names and shapes.
void Restore(const ParamList& params, const CheckpointData& data, const std::string& prefix) {
  for (const auto& p : params) {
    const auto it = data.tensors.find(prefix + p.name);
    if (it == data.tensors.end()) throw CheckpointError("checkpoint: missing tensor '" + prefix + p.name + "'");
    if (it->second.shape() != p.tensor.shape()) {
      throw CheckpointError("checkpoint: tensor '" + prefix + p.name + "' has shape " +
                            ShapeToString(it->second.shape()) + ", model expects " +
                            ShapeToString(p.tensor.shape()));
    }
    Tensor dst = p.tensor;
    std::copy(it->second.data().begin(), it->second.data().end(), dst.mutable_data().begin());
  }
}

NormStats StatsFromJson(const nlohmann::json& j) {
  NormStats s;
  for (int c = 0; c < 3; ++c) {
    s.mean[static_cast<size_t>(c)] = j.at("mean").at(static_cast<size_t>(c)).get<float>();
    s.std[static_cast<size_t>(c)] = j.at("std").at(static_cast<size_t>(c)).get<float>();
  }
  return s;
}

}  // namespace

nlohmann::json EvalMetrics::ToJson() const {
  return {{"games", games},
          {"comm_rate", comm_rate},
          {"class_comm_rate", class_comm_rate},
          {"loss", loss},
          {"game_loss", game_loss},
          {"perceptual", perceptual},
          {"target_perceptual", target_perceptual}};
}

nlohmann::json EpochMetrics::ToJson() const {
  nlohmann::json j = {{"epoch", epoch},           {"step", step},
                      {"loss", loss},             {"game_loss", game_loss},
                      {"perceptual", perceptual}, {"train_comm_rate", train_comm_rate}};
  if (eval) j["eval"] = eval->ToJson();
  return j;
}

void FeatureCache::Build(const VisionEncoder& encoder, const Dataset& dataset, const NormStats& stats,
                         bool with_taps) {
  NoGradGuard no_grad;
  flat_dim_ = encoder.flat_dim();
  flat_.assign(dataset.size() * static_cast<size_t>(flat_dim_), 0.0f);
  taps_.clear();
  tap_shapes_.clear();
  for (size_t start = 0; start < dataset.size(); start += kChunk) {
    const size_t end = std::min(dataset.size(), start + kChunk);
    std::vector<int> idx;
    for (size_t i = start; i < end; ++i) idx.push_back(static_cast<int>(i));
    BackboneOutput out = encoder.Backbone(NormalizedBatch(dataset, idx, stats));
    std::copy(out.flat.data().begin(), out.flat.data().end(), flat_.begin() + static_cast<int64_t>(start) * flat_dim_);
    if (!with_taps) continue;
    if (taps_.empty()) {
      for (const Tensor& t : out.taps) {
        tap_shapes_.push_back({t.dim(1), t.dim(2), t.dim(3)});
        taps_.emplace_back(dataset.size() * static_cast<size_t>(t.numel() / t.dim(0)));
      }
    }
    for (size_t l = 0; l < out.taps.size(); ++l) {
      const int64_t per = NumElements(tap_shapes_[l]);
      std::copy(out.taps[l].data().begin(), out.taps[l].data().end(),
                taps_[l].begin() + static_cast<int64_t>(start) * per);
    }
  }
}

Tensor FeatureCache::Flat(const std::vector<int>& rows) const {
  std::vector<float> data;
  data.reserve(rows.size() * static_cast<size_t>(flat_dim_));
  for (int r : rows) {
    auto it = flat_.begin() + static_cast<int64_t>(r) * flat_dim_;
    data.insert(data.end(), it, it + flat_dim_);
  }
  return Tensor::FromData({static_cast<int64_t>(rows.size()), flat_dim_}, std::move(data));
}

std::vector<Tensor> FeatureCache::Taps(const std::vector<int>& rows) const {
  if (taps_.empty()) throw std::logic_error("feature cache: taps were not built");
  std::vector<Tensor> out;
  for (size_t l = 0; l < taps_.size(); ++l) {
    const int64_t per = NumElements(tap_shapes_[l]);
    std::vector<float> data;
    data.reserve(rows.size() * static_cast<size_t>(per));
    for (int r : rows) {
      auto it = taps_[l].begin() + static_cast<int64_t>(r) * per;
      data.insert(data.end(), it, it + per);
    }
    Shape shape{static_cast<int64_t>(rows.size())};
    shape.insert(shape.end(), tap_shapes_[l].begin(), tap_shapes_[l].end());
    out.push_back(Tensor::FromData(shape, std::move(data)));
  }
  return out;
}

std::unique_ptr<AgentPair> BuildAgents(const TrainConfig& config, const NormStats& stats) {
  return std::make_unique<AgentPair>(config.backbone, config.agents, config.raster, stats, config.seed);
}

Tensor LoadTargetImage(const fs::path& path, const RasterConfig& raster, const NormStats& stats) {
  Image img;
  try {
    img = ReadPng(path);
  } catch (const ImageError& e) {
    throw ConfigError(std::string("loss.fixed_image: ") + e.what());
  }
  img = ResizeBilinear(CenterSquareCrop(img), raster.width, raster.height);
  return Tensor::FromData({1, 3, raster.height, raster.width},
                          NormalizeImage(img.pixels, img.width, img.height, stats));
}

LoadedModel LoadModel(const fs::path& checkpoint) {
  LoadedModel m;
  m.checkpoint = LoadCheckpointFile(checkpoint);
  const auto& meta = m.checkpoint.metadata;
  try {
    m.config = ParseTrainConfig(meta.at("config").get<std::string>());
    m.stats = StatsFromJson(meta.at("stats"));
    m.state.epoch = meta.at("epoch").get<int>();
    m.state.step = meta.at("step").get<int64_t>();
    m.state.game_rng_position = meta.at("game_rng_position").get<uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint: bad metadata: ") + e.what());
  }
  m.agents = BuildAgents(m.config, m.stats);
  Restore(m.agents->AllParameters(), m.checkpoint, "");
  return m;
}

EvalMetrics Evaluate(const AgentPair& agents, const TrainConfig& config, const Dataset& input,
                     const EvalOptions& options) {
  const RasterConfig& raster = agents.raster_config();
  const Dataset* data = &input;
  Dataset resized;
  if (input.width != raster.width || input.height != raster.height) {
    if (!options.resize) {
      throw std::invalid_argument("evaluate: dataset is " + std::to_string(input.width) + "x" +
                                  std::to_string(input.height) + " but the model expects " +
                                  std::to_string(raster.width) + "x" + std::to_string(raster.height) +
                                  " (pass resize to rescale)");
    }
    resized = Resized(input, raster.width, raster.height);
    data = &resized;
  }
  NoGradGuard no_grad;
  const VisionEncoder& encoder = agents.encoder();
  const auto& weights = config.loss.weights;
  const bool fixed = config.loss.target == PerceptualTarget::kFixedImage;
  std::vector<Tensor> fixed_taps;
  if (fixed) fixed_taps = encoder.FeatureStack(LoadTargetImage(config.loss.fixed_image, raster, agents.stats()));

  const size_t n = data->size();
  std::vector<std::vector<float>> photo_feat(n), sketch_feat(n);
  std::vector<double> perc_matched(n), perc_fixed(n);
  for (size_t start = 0; start < n; start += kChunk) {
    const size_t end = std::min(n, start + kChunk);
    std::vector<int> idx;
    for (size_t i = start; i < end; ++i) idx.push_back(static_cast<int>(i));
    BackboneOutput photo = encoder.Backbone(NormalizedBatch(*data, idx, agents.stats()));
    SenderOutput sent = agents.SenderFromEmbedding(encoder.Project(photo.flat));
    BackboneOutput sketch = encoder.Backbone(agents.SketchInput(sent.sketches));
    Tensor fp = agents.receiver()(encoder.Project(photo.flat));
    Tensor fs = agents.receiver()(encoder.Project(sketch.flat));
    Tensor pm = Perceptual(sketch.taps, photo.taps, weights);
    Tensor pf = fixed ? Perceptual(sketch.taps, fixed_taps, weights) : pm;
    for (size_t i = start; i < end; ++i) {
      const auto r = static_cast<int64_t>(i - start);
      photo_feat[i] = Row(fp, r);
      sketch_feat[i] = Row(fs, r);
      perc_matched[i] = pm.data()[static_cast<size_t>(r)];
      perc_fixed[i] = pf.data()[static_cast<size_t>(r)];
    }
  }

  GameSampler sampler(*data, config.game);
  Rng rng(options.seed, kEvalStream);
  std::vector<int> predictions, targets;
  std::vector<std::vector<int>> labels;
  double loss = 0.0, game = 0.0, perc = 0.0, target_perc = 0.0;
  const bool use_perc = config.loss.perceptual_enabled();
  for (int g = 0; g < options.games; ++g) {
    GameRound round = sampler.SampleRound(rng);
    const auto& s = sketch_feat[static_cast<size_t>(round.sender_target)];
    std::vector<float> scores;
    for (int p : round.pool) {
      const auto& f = photo_feat[static_cast<size_t>(p)];
      float dot = 0.0f;
      for (size_t k = 0; k < f.size(); ++k) dot += s[k] * f[k];
      scores.push_back(dot);
    }
    predictions.push_back(Argmax(scores));
    targets.push_back(round.target);
    labels.push_back(round.labels);
    const double gl = MultiMargin(scores, round.target);
    const double pm = perc_matched[static_cast<size_t>(round.sender_target)];
    const double pt = perc_fixed[static_cast<size_t>(round.sender_target)];
    game += gl;
    perc += pm;
    target_perc += pt;
    loss += gl + (use_perc ? config.loss.lambda * pt : 0.0);
  }
  EvalMetrics m;
  m.games = options.games;
  const double count = std::max(1, options.games);
  m.comm_rate = CommRate(predictions, targets);
  m.class_comm_rate = data->labeled() ? ClassCommRate(predictions, targets, labels) : m.comm_rate;
  m.loss = loss / count;
  m.game_loss = game / count;
  m.perceptual = perc / count;
  m.target_perceptual = target_perc / count;
  return m;
}

void DumpSketches(const AgentPair& agents, const Dataset& images, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw std::runtime_error("sketch: cannot create " + out_dir.string());
  const RasterConfig& raster = agents.raster_config();
  if (images.width != raster.width || images.height != raster.height) {
    throw std::invalid_argument("sketch: images must be " + std::to_string(raster.width) + "x" +
                                std::to_string(raster.height));
  }
  NoGradGuard no_grad;
  const Primitive primitive = agents.agent_config().primitive;
  const int arity = PrimitiveArity(primitive);
  for (size_t i = 0; i < images.size(); ++i) {
    const int idx = static_cast<int>(i);
    SenderOutput out = agents.SenderForward(NormalizedBatch(images, std::span<const int>(&idx, 1), agents.stats()));
    const std::string stem = std::to_string(i);
    WritePng(images.image(i), out_dir / ("photo_" + stem + ".png"));
    SketchRaster sketch{raster.width, raster.height, {out.sketches.data().begin(), out.sketches.data().end()}};
    WriteSketchPng(sketch, out_dir / ("sketch_" + stem + ".png"));
    nlohmann::json strokes = nlohmann::json::array();
    const auto c = out.coords.data();
    for (size_t k = 0; k + static_cast<size_t>(arity) <= c.size(); k += static_cast<size_t>(arity)) {
      strokes.push_back(std::vector<float>(c.begin() + static_cast<int64_t>(k),
                                           c.begin() + static_cast<int64_t>(k) + arity));
    }
    nlohmann::json doc = {{"primitive", std::string(PrimitiveName(primitive))}, {"strokes", strokes}};
    std::ofstream f(out_dir / ("strokes_" + stem + ".json"));
    if (!f) throw std::runtime_error("sketch: cannot write into " + out_dir.string());
    f << doc.dump() << '\n';
  }
}

Trainer::Trainer(TrainConfig config, const DatasetSplits& data) : config_(std::move(config)), data_(&data) {
  config_.Validate();
  stats_ = ComputeStats(data.train);
  agents_ = BuildAgents(config_, stats_);
  Init();
}

Trainer::Trainer(const fs::path& checkpoint, const DatasetSplits& data) : data_(&data) {
  LoadedModel m = LoadModel(checkpoint);
  config_ = m.config;
  config_.Validate();
  stats_ = m.stats;
  state_ = m.state;
  agents_ = std::move(m.agents);
  Init();
  const auto& params = optimizer_->params();
  auto moment = [&](const std::string& name, const Shape& shape) {
    const auto it = m.checkpoint.tensors.find(name);
    if (it == m.checkpoint.tensors.end()) throw CheckpointError("checkpoint: missing tensor '" + name + "'");
    if (it->second.shape() != shape) throw CheckpointError("checkpoint: bad shape for '" + name + "'");
    return std::vector<float>(it->second.data().begin(), it->second.data().end());
  };
  for (size_t i = 0; i < params.size(); ++i) {
    optimizer_->first_moments()[i] = moment("adam.m." + params[i].name, params[i].tensor.shape());
    optimizer_->second_moments()[i] = moment("adam.v." + params[i].name, params[i].tensor.shape());
  }
  optimizer_->set_step_count(m.checkpoint.metadata.at("adam_step").get<int64_t>());
  game_rng_->set_position(state_.game_rng_position);
}

void Trainer::Init() {
  if (data_->train.width != config_.raster.width || data_->train.height != config_.raster.height) {
    throw ConfigError("data: train images are " + std::to_string(data_->train.width) + "x" +
                      std::to_string(data_->train.height) + ", canvas is " + std::to_string(config_.raster.width) +
                      "x" + std::to_string(config_.raster.height));
  }
  optimizer_ = std::make_unique<Adam>(agents_->Parameters(), AdamOptions{config_.lr});
  sampler_ = std::make_unique<GameSampler>(data_->train, config_.game);
  game_rng_ = std::make_unique<Rng>(config_.game.seed, kGameStream);
  if (config_.loss.perceptual_enabled() && config_.loss.target == PerceptualTarget::kFixedImage) {
    fixed_target_ = LoadTargetImage(config_.loss.fixed_image, config_.raster, stats_);
  }
  if (config_.backbone.frozen) {
    cache_.Build(agents_->encoder(), data_->train, stats_, NeedsMatchedTaps(config_.loss));
    if (fixed_target_.defined()) {
      NoGradGuard no_grad;
      fixed_taps_ = agents_->encoder().FeatureStack(fixed_target_);
    }
  }
}

int Trainer::steps_per_epoch() const {
  if (config_.steps_per_epoch > 0) return config_.steps_per_epoch;
  const auto k1 = static_cast<size_t>(config_.game.pool_size());
  return static_cast<int>((data_->train.size() + k1 - 1) / k1);
}

nlohmann::json Trainer::BatchJson(const GameBatch& batch) const {
  return {{"epoch", state_.epoch + 1},
          {"step", state_.step},
          {"sender_targets", batch.sender_targets},
          {"pool", batch.pool},
          {"permutation", batch.permutation}};
}

StepStats Trainer::Step() {
  GameBatch batch = sampler_->MakeBatch(*game_rng_);
  return StepOn(batch);
}

StepStats Trainer::StepOn(const GameBatch& batch) {
  const VisionEncoder& encoder = agents_->encoder();
  const bool matched = NeedsMatchedTaps(config_.loss);
  Tensor flat_s, flat_p;
  std::vector<Tensor> target_taps;
  if (config_.backbone.frozen) {
    flat_s = cache_.Flat(batch.sender_targets);
    flat_p = cache_.Flat(batch.pool);
    if (matched) target_taps = cache_.Taps(batch.sender_targets);
  } else {
    std::vector<int> unique(batch.sender_targets);
    unique.insert(unique.end(), batch.pool.begin(), batch.pool.end());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    std::map<int, int> slot;
    for (size_t i = 0; i < unique.size(); ++i) slot[unique[i]] = static_cast<int>(i);
    auto rows = [&](const std::vector<int>& ids) {
      std::vector<int> r;
      for (int id : ids) r.push_back(slot.at(id));
      return r;
    };
    BackboneOutput photos = encoder.Backbone(NormalizedBatch(data_->train, unique, stats_));
    flat_s = ops::IndexSelect(photos.flat, rows(batch.sender_targets));
    flat_p = ops::IndexSelect(photos.flat, rows(batch.pool));
    if (matched) {
      for (const Tensor& t : photos.taps) target_taps.push_back(ops::IndexSelect(t.detach(), rows(batch.sender_targets)));
    }
  }
  if (fixed_target_.defined() && config_.loss.perceptual_enabled()) {
    if (fixed_taps_.empty() || !config_.backbone.frozen) {
      NoGradGuard no_grad;
      target_taps = encoder.FeatureStack(fixed_target_);
    } else {
      target_taps = fixed_taps_;
    }
  }

  SenderOutput sent = agents_->SenderFromEmbedding(encoder.Project(flat_s));
  BackboneOutput sketch = encoder.Backbone(agents_->SketchInput(sent.sketches));
  Tensor f_sketch = agents_->receiver()(encoder.Project(sketch.flat));
  Tensor f_photo = agents_->receiver()(encoder.Project(flat_p));
  Tensor scores = AgentPair::Scores(f_sketch, f_photo);
  Tensor game = MultiMargin(scores, batch.permutation);
  Tensor perceptual;
  if (config_.loss.perceptual_enabled()) perceptual = Perceptual(sketch.taps, target_taps, config_.loss.weights);
  Tensor loss = TotalLoss(game, perceptual, config_.loss.lambda);

  StepStats stats;
  stats.loss = loss.item();
  stats.game_loss = ops::Mean(game.detach()).item();
  stats.perceptual = perceptual.defined() ? ops::Mean(perceptual.detach()).item() : 0.0f;
  stats.games = static_cast<int>(batch.size());
  const int64_t p = scores.dim(1);
  for (size_t i = 0; i < batch.size(); ++i) {
    auto row = scores.data().subspan(i * static_cast<size_t>(p), static_cast<size_t>(p));
    stats.correct += Argmax(row) == batch.permutation[i];
  }
  if (!std::isfinite(stats.loss)) {
    throw NonFiniteLossError("non-finite loss at step " + std::to_string(state_.step), BatchJson(batch));
  }

  optimizer_->ZeroGrad();
  loss.backward();
  optimizer_->Step();
  ++state_.step;
  state_.game_rng_position = game_rng_->position();
  return stats;
}

EvalMetrics Trainer::EvaluateTest() const {
  EvalOptions options;
  options.games = config_.eval_games;
  options.seed = config_.seed;
  return Evaluate(*agents_, config_, data_->test, options);
}

EpochMetrics Trainer::RunEpoch(bool with_eval) {
  EpochMetrics m;
  const int steps = steps_per_epoch();
  double loss = 0.0, game = 0.0, perc = 0.0;
  int64_t correct = 0, games = 0;
  for (int s = 0; s < steps; ++s) {
    StepStats st = Step();
    loss += st.loss;
    game += st.game_loss;
    perc += st.perceptual;
    correct += st.correct;
    games += st.games;
  }
  ++state_.epoch;
  m.epoch = state_.epoch;
  m.step = state_.step;
  m.loss = loss / steps;
  m.game_loss = game / steps;
  m.perceptual = perc / steps;
  m.train_comm_rate = games ? static_cast<double>(correct) / static_cast<double>(games) : 0.0;
  if (with_eval) m.eval = EvaluateTest();
  return m;
}

void Trainer::Train(const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream log(out_dir / "metrics.jsonl", state_.epoch > 0 ? std::ios::app : std::ios::trunc);
  if (!log) throw std::runtime_error("train: cannot write " + (out_dir / "metrics.jsonl").string());
  {
    std::ofstream cfg(out_dir / "config.yaml");
    cfg << DumpTrainConfig(config_);
  }
  while (state_.epoch < config_.epochs) {
    const int next = state_.epoch + 1;
    const bool eval = (config_.eval_every > 0 && next % config_.eval_every == 0) || next == config_.epochs;
    const auto t0 = std::chrono::steady_clock::now();
    EpochMetrics m;
    try {
      m = RunEpoch(eval);
    } catch (const NonFiniteLossError& e) {
      std::ofstream bad(out_dir / "bad_batch.json");
      bad << e.batch().dump(2) << '\n';
      spdlog::error("{}; batch saved to {}", e.what(), (out_dir / "bad_batch.json").string());
      throw;
    }
    log << m.ToJson().dump() << '\n';
    log.flush();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (m.eval) {
      spdlog::info("epoch {} loss {:.4f} train comm {:.3f} test comm {:.3f} ({:.1f}s)", m.epoch, m.loss,
                   m.train_comm_rate, m.eval->comm_rate, secs);
    } else {
      spdlog::info("epoch {} loss {:.4f} train comm {:.3f} ({:.1f}s)", m.epoch, m.loss, m.train_comm_rate, secs);
    }
    if (config_.checkpoint_every > 0 && m.epoch % config_.checkpoint_every == 0) {
      Save(out_dir / ("epoch_" + std::to_string(m.epoch) + ".skcm"));
    }
  }
  Save(out_dir / "final.skcm");
}

CheckpointData Trainer::Snapshot() const {
  CheckpointData d;
  d.metadata = {{"format", "sketchcomm"},
                {"config", DumpTrainConfig(config_)},
                {"stats", {{"mean", stats_.mean}, {"std", stats_.std}}},
                {"epoch", state_.epoch},
                {"step", state_.step},
                {"game_rng_position", state_.game_rng_position},
                {"adam_step", optimizer_->step_count()}};
  for (const auto& p : agents_->AllParameters()) {
    d.tensors[p.name] = p.tensor.clone();
    d.order.push_back(p.name);
  }
  const Adam& opt = *optimizer_;
  const auto& params = opt.params();
  for (size_t i = 0; i < params.size(); ++i) {
    const std::string m = "adam.m." + params[i].name, v = "adam.v." + params[i].name;
    d.tensors[m] = Tensor::FromData(params[i].tensor.shape(), opt.first_moments()[i]);
    d.tensors[v] = Tensor::FromData(params[i].tensor.shape(), opt.second_moments()[i]);
    d.order.push_back(m);
    d.order.push_back(v);
  }
  return d;
}

void Trainer::Save(const fs::path& path) const { SaveCheckpointFile(path, Snapshot()); }

}  // namespace sketchcomm
