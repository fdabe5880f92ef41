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

#ifndef SKETCHCOMM_AGENTS_HPP_
#define SKETCHCOMM_AGENTS_HPP_

#include <span>
#include <vector>

#include "sketchcomm/dataset.hpp"
#include "sketchcomm/encoder.hpp"
#include "sketchcomm/raster.hpp"

namespace sketchcomm {

struct AgentConfig {
  Primitive primitive = Primitive::kLine;
  int strokes = 20;
  int sender_hidden1 = 64;
  int sender_hidden2 = 256;
  int receiver_hidden = 64;
  int receiver_out = 64;

  int sender_outputs() const { return strokes * PrimitiveArity(primitive); }
};

// Embedding -> relu -> relu -> tanh coordinates in [-1, 1].
class Sender {
 public:
  Sender(const AgentConfig& config, int embed_dim, Rng& rng);
  Tensor operator()(const Tensor& embedding) const;  // [N, strokes * arity]
  ParamList Parameters() const;

 private:
  Linear fc0_, fc1_, fc2_;
};

// Embedding -> relu -> linear match-space feature.
class Receiver {
 public:
  Receiver(const AgentConfig& config, int embed_dim, Rng& rng);
  Tensor operator()(const Tensor& embedding) const;  // [N, receiver_out]
  ParamList Parameters() const;

 private:
  Linear fc0_, fc1_;
};

struct ScoreVector {
  std::vector<float> scores;
  int target = 0;

  int prediction() const;
};

// Index of the largest value; the lowest index wins ties.
int Argmax(std::span<const float> values);

struct SenderOutput {
  Tensor coords;    // [N, strokes * arity]
  Tensor sketches;  // [N, 1, H, W]
};

// Both agents with their shared visual front end.
class AgentPair {
 public:
  AgentPair(const BackboneConfig& backbone, const AgentConfig& agents, const RasterConfig& raster,
            const NormStats& stats, uint64_t seed);

  SenderOutput SenderForward(const Tensor& photos) const;
  SenderOutput SenderFromEmbedding(const Tensor& embedding) const;
  // [N, 1, H, W] sketches in [0, 1] -> [N, 3, H, W] normalized like photos.
  Tensor SketchInput(const Tensor& sketches) const;
  Tensor ReceiverFeatures(const Tensor& images) const;
  // [S, D] x [P, D] -> [S, P] scalar products.
  static Tensor Scores(const Tensor& sketch_features, const Tensor& photo_features);

  // One sketch against K+1 candidate photos ([K+1, 3, H, W], normalized).
  ScoreVector ReceiverForward(const Tensor& sketch, const Tensor& photos, int target) const;

  ParamList Parameters() const;
  ParamList AllParameters() const;

  const VisionEncoder& encoder() const { return encoder_; }
  const Sender& sender() const { return sender_; }
  const Receiver& receiver() const { return receiver_; }
  const AgentConfig& agent_config() const { return agent_config_; }
  const RasterConfig& raster_config() const { return raster_; }
  const NormStats& stats() const { return stats_; }

 private:
  AgentConfig agent_config_;
  RasterConfig raster_;
  NormStats stats_;
  Rng init_rng_;
  VisionEncoder encoder_;
  Sender sender_;
  Receiver receiver_;
};

}  // namespace sketchcomm

#endif  // SKETCHCOMM_AGENTS_HPP_
