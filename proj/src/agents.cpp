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

#include "sketchcomm/agents.hpp"

#include <stdexcept>

#include "sketchcomm/ops.hpp"

namespace sketchcomm {

namespace {

void AppendLinear(ParamList& params, const std::string& prefix, const Linear& layer) {
  params.push_back({prefix + ".weight", layer.weight});
  params.push_back({prefix + ".bias", layer.bias});
}

}  // namespace

Sender::Sender(const AgentConfig& config, int embed_dim, Rng& rng)
    : fc0_(Linear::FanInUniform(embed_dim, config.sender_hidden1, rng)),
      fc1_(Linear::FanInUniform(config.sender_hidden1, config.sender_hidden2, rng)),
      fc2_(Linear::FanInUniform(config.sender_hidden2, config.sender_outputs(), rng)) {}

Tensor Sender::operator()(const Tensor& embedding) const {
  Tensor h = ops::Relu(fc0_(embedding));
  h = ops::Relu(fc1_(h));
  return ops::Tanh(fc2_(h));
}

ParamList Sender::Parameters() const {
  ParamList params;
  AppendLinear(params, "sender.fc0", fc0_);
  AppendLinear(params, "sender.fc1", fc1_);
  AppendLinear(params, "sender.fc2", fc2_);
  return params;
}

Receiver::Receiver(const AgentConfig& config, int embed_dim, Rng& rng)
    : fc0_(Linear::FanInUniform(embed_dim, config.receiver_hidden, rng)),
      fc1_(Linear::FanInUniform(config.receiver_hidden, config.receiver_out, rng)) {}

Tensor Receiver::operator()(const Tensor& embedding) const { return fc1_(ops::Relu(fc0_(embedding))); }

ParamList Receiver::Parameters() const {
  ParamList params;
  AppendLinear(params, "receiver.fc0", fc0_);
  AppendLinear(params, "receiver.fc1", fc1_);
  return params;
}

int Argmax(std::span<const float> values) {
  if (values.empty()) throw std::invalid_argument("argmax: empty input");
  int best = 0;
  for (size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[static_cast<size_t>(best)]) best = static_cast<int>(k);
  }
  return best;
}

int ScoreVector::prediction() const { return Argmax(scores); }

AgentPair::AgentPair(const BackboneConfig& backbone, const AgentConfig& agents, const RasterConfig& raster,
                     const NormStats& stats, uint64_t seed)
    : agent_config_(agents),
      raster_(raster),
      stats_(stats),
      init_rng_(seed, /*stream=*/100),
      encoder_(backbone, raster.height, raster.width, init_rng_),
      sender_(agents, backbone.embed_dim, init_rng_),
      receiver_(agents, backbone.embed_dim, init_rng_) {
  if (agents.strokes < 0) throw std::invalid_argument("agents: negative stroke count");
  raster_.Validate();
}

SenderOutput AgentPair::SenderFromEmbedding(const Tensor& embedding) const {
  Tensor coords = sender_(embedding);
  Tensor sketches = RasterizeBatch(coords, agent_config_.primitive, raster_);
  return {coords, sketches};
}

SenderOutput AgentPair::SenderForward(const Tensor& photos) const {
  return SenderFromEmbedding(encoder_.Encode(photos));
}

Tensor AgentPair::SketchInput(const Tensor& sketches) const {
  const int64_t n = sketches.dim(0);
  const Shape full{n, 3, sketches.dim(2), sketches.dim(3)};
  Tensor mean = Tensor::FromData({1, 3, 1, 1}, {stats_.mean[0], stats_.mean[1], stats_.mean[2]});
  Tensor inv_std = Tensor::FromData({1, 3, 1, 1}, {1.0f / stats_.std[0], 1.0f / stats_.std[1], 1.0f / stats_.std[2]});
  return ops::Mul(ops::Sub(ops::BroadcastTo(sketches, full), mean), inv_std);
}

Tensor AgentPair::ReceiverFeatures(const Tensor& images) const { return receiver_(encoder_.Encode(images)); }

Tensor AgentPair::Scores(const Tensor& sketch_features, const Tensor& photo_features) {
  return ops::MatMul(sketch_features, ops::Transpose(photo_features));
}

ScoreVector AgentPair::ReceiverForward(const Tensor& sketch, const Tensor& photos, int target) const {
  if (photos.rank() != 4 || photos.dim(0) == 0) throw std::invalid_argument("receiver: empty photo set");
  if (target < 0 || target >= photos.dim(0)) throw std::invalid_argument("receiver: target out of range");
  Tensor sketch_features = ReceiverFeatures(SketchInput(sketch));
  Tensor photo_features = ReceiverFeatures(photos);
  Tensor scores = Scores(sketch_features, photo_features);
  return {{scores.data().begin(), scores.data().end()}, target};
}

ParamList AgentPair::Parameters() const {
  ParamList params = encoder_.Parameters();
  for (auto& p : sender_.Parameters()) params.push_back(p);
  for (auto& p : receiver_.Parameters()) params.push_back(p);
  return params;
}

ParamList AgentPair::AllParameters() const {
  ParamList params = encoder_.AllParameters();
  for (auto& p : sender_.Parameters()) params.push_back(p);
  for (auto& p : receiver_.Parameters()) params.push_back(p);
  return params;
}

}  // namespace sketchcomm
