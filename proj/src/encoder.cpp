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

#include "sketchcomm/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sketchcomm/ops.hpp"

namespace sketchcomm {

void BackboneConfig::Validate(int height, int width) const {
  if (blocks.empty()) throw std::invalid_argument("backbone: no blocks");
  if (embed_dim < 1) throw std::invalid_argument("backbone: embed_dim must be >= 1");
  if (taps.empty() || taps.size() > blocks.size()) {
    throw std::invalid_argument("backbone: need 1..#blocks taps");
  }
  for (size_t k = 0; k < taps.size(); ++k) {
    if (taps[k] < 0 || taps[k] >= static_cast<int>(blocks.size())) {
      throw std::invalid_argument("backbone: tap " + std::to_string(taps[k]) + " is not a block index");
    }
    if (k > 0 && taps[k] <= taps[k - 1]) throw std::invalid_argument("backbone: taps must be increasing");
  }
  for (const auto& b : blocks) {
    if (b.out_channels < 1 || b.conv_count < 1) throw std::invalid_argument("backbone: empty block");
  }
  int h = height, w = width;
  for (size_t b = 0; b < blocks.size(); ++b) {
    h /= 2;
    w /= 2;
    if (h < 1 || w < 1) {
      throw std::invalid_argument("backbone: " + std::to_string(height) + "x" + std::to_string(width) +
                                  " input reaches zero size after block " + std::to_string(b));
    }
  }
}

Linear Linear::FanInUniform(int in, int out, Rng& rng, bool requires_grad) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(in));
  std::vector<float> w(static_cast<size_t>(in) * out);
  for (float& v : w) v = rng.Uniform(-bound, bound);
  std::vector<float> b(static_cast<size_t>(out));
  for (float& v : b) v = rng.Uniform(-bound, bound);
  return {Tensor::FromData({in, out}, std::move(w), requires_grad), Tensor::FromData({out}, std::move(b), requires_grad)};
}

Tensor Linear::operator()(const Tensor& x) const { return ops::Add(ops::MatMul(x, weight), bias); }

VisionEncoder::VisionEncoder(const BackboneConfig& config, int height, int width, Rng& init_rng)
    : config_(config), height_(height), width_(width) {
  config_.Validate(height, width);
  int in_channels = 3;
  int h = height, w = width;
  const bool trainable = !config_.frozen;
  for (const auto& block : config_.blocks) {
    std::vector<Conv> convs;
    for (int k = 0; k < block.conv_count; ++k) {
      const int fan_in = in_channels * 9;
      const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
      std::vector<float> weights(static_cast<size_t>(block.out_channels) * fan_in);
      for (float& v : weights) v = init_rng.Uniform(-bound, bound);
      convs.push_back({Tensor::FromData({block.out_channels, in_channels, 3, 3}, std::move(weights), trainable),
                       Tensor::Zeros({block.out_channels}, trainable)});
      in_channels = block.out_channels;
    }
    blocks_.push_back(std::move(convs));
    h /= 2;
    w /= 2;
  }
  flat_dim_ = static_cast<int64_t>(in_channels) * h * w;
  projection_ = Linear::FanInUniform(static_cast<int>(flat_dim_), config_.embed_dim, init_rng);
}

BackboneOutput VisionEncoder::Backbone(const Tensor& images) const {
  if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != height_ || images.dim(3) != width_) {
    throw ShapeError("backbone: expected [N, 3, " + std::to_string(height_) + ", " + std::to_string(width_) +
                     "], got " + ShapeToString(images.shape()));
  }
  images_seen_ += images.dim(0);
  BackboneOutput out;
  Tensor x = images;
  size_t next_tap = 0;
  for (size_t b = 0; b < blocks_.size(); ++b) {
    for (const Conv& conv : blocks_[b]) x = ops::Relu(ops::Conv2d(x, conv.weight, conv.bias, 1, 1));
    if (next_tap < config_.taps.size() && config_.taps[next_tap] == static_cast<int>(b)) {
      out.taps.push_back(x);
      ++next_tap;
    }
    x = ops::MaxPool2d(x, 2);
  }
  out.flat = ops::Reshape(x, {x.dim(0), flat_dim_});
  return out;
}

Tensor VisionEncoder::Project(const Tensor& flat) const { return projection_(flat); }

Tensor VisionEncoder::Encode(const Tensor& images) const { return Project(Backbone(images).flat); }

std::vector<Tensor> VisionEncoder::FeatureStack(const Tensor& images) const { return Backbone(images).taps; }

ParamList VisionEncoder::AllParameters() const {
  ParamList params;
  for (size_t b = 0; b < blocks_.size(); ++b) {
    for (size_t k = 0; k < blocks_[b].size(); ++k) {
      const std::string prefix = "backbone.block" + std::to_string(b) + ".conv" + std::to_string(k);
      params.push_back({prefix + ".weight", blocks_[b][k].weight});
      params.push_back({prefix + ".bias", blocks_[b][k].bias});
    }
  }
  params.push_back({"encoder.projection.weight", projection_.weight});
  params.push_back({"encoder.projection.bias", projection_.bias});
  return params;
}

ParamList VisionEncoder::Parameters() const {
  ParamList all = AllParameters();
  ParamList trainable;
  for (auto& p : all) {
    if (p.tensor.requires_grad()) trainable.push_back(p);
  }
  return trainable;
}

}  // namespace sketchcomm
