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

#ifndef SKETCHCOMM_ENCODER_HPP_
#define SKETCHCOMM_ENCODER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sketchcomm/adam.hpp"
#include "sketchcomm/rng.hpp"
#include "sketchcomm/tensor.hpp"

namespace sketchcomm {

struct BackboneBlock {
  int out_channels = 16;
  int conv_count = 2;
};

struct BackboneConfig {
  std::vector<BackboneBlock> blocks = {{16, 2}, {32, 2}, {64, 2}, {64, 2}};
  // Block indices whose pre-pool activations form the feature stack.
  std::vector<int> taps = {0, 1, 2, 3};
  int embed_dim = 64;
  bool frozen = true;

  // Throws std::invalid_argument if the taps are malformed or the input
  // would shrink to nothing before the last block.
  void Validate(int height, int width) const;
};

// Fully connected layer, y = x W + b with W stored [in, out].
struct Linear {
  Tensor weight;
  Tensor bias;

  // W and b uniform in +-1/sqrt(in).
  static Linear FanInUniform(int in, int out, Rng& rng, bool requires_grad = true);
  Tensor operator()(const Tensor& x) const;
};

struct BackboneOutput {
  std::vector<Tensor> taps;  // [N, C_l, H_l, W_l] each, post-relu, pre-pool
  Tensor flat;               // [N, C * H * W] after the last pool
};

// Shared convolutional front end plus a linear projection to embed_dim.
class VisionEncoder {
 public:
  VisionEncoder(const BackboneConfig& config, int height, int width, Rng& init_rng);

  // One pass over [N, 3, H, W] normalized images.
  BackboneOutput Backbone(const Tensor& images) const;
  Tensor Project(const Tensor& flat) const;
  Tensor Encode(const Tensor& images) const;
  std::vector<Tensor> FeatureStack(const Tensor& images) const;

  // Trainable tensors only; conv weights are excluded when frozen.
  ParamList Parameters() const;
  ParamList AllParameters() const;

  const BackboneConfig& config() const { return config_; }
  int height() const { return height_; }
  int width() const { return width_; }
  int64_t flat_dim() const { return flat_dim_; }
  // Images pushed through the backbone since construction.
  int64_t images_seen() const { return images_seen_; }

 private:
  struct Conv {
    Tensor weight;
    Tensor bias;
  };

  BackboneConfig config_;
  int height_;
  int width_;
  int64_t flat_dim_ = 0;
  std::vector<std::vector<Conv>> blocks_;
  Linear projection_;
  mutable int64_t images_seen_ = 0;
};

}  // namespace sketchcomm

#endif  // SKETCHCOMM_ENCODER_HPP_
