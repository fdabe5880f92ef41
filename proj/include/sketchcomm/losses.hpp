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

#ifndef SKETCHCOMM_LOSSES_HPP_
#define SKETCHCOMM_LOSSES_HPP_

#include <span>
#include <string>
#include <vector>

#include "sketchcomm/encoder.hpp"
#include "sketchcomm/tensor.hpp"

namespace sketchcomm {

enum class PerceptualTarget { kMatchedPhoto, kFixedImage, kNone };

std::string PerceptualTargetName(PerceptualTarget target);
PerceptualTarget ParsePerceptualTarget(const std::string& name);

struct LossConfig {
  std::vector<float> weights = {1, 1, 1, 1};  // one per tapped layer
  float lambda = 1.0f;
  PerceptualTarget target = PerceptualTarget::kMatchedPhoto;
  std::string fixed_image;  // PNG path, used with kFixedImage

  bool perceptual_enabled() const { return target != PerceptualTarget::kNone && lambda != 0.0f; }
  // Throws std::invalid_argument on negative values or a layer-count mismatch.
  void Validate(size_t layers) const;
};

// Sum over j != y of max(0, 1 - x_y + x_j) on a single score vector.
float MultiMargin(std::span<const float> scores, int target);

// Row-wise hinge loss on [B, P] scores -> [B].
Tensor MultiMargin(const Tensor& scores, const std::vector<int>& targets);

// Per-sample perceptual distance between two feature stacks (raw, pre-
// normalization maps of matching shapes) -> [N]. A stack whose batch size is
// 1 is broadcast against the other.
Tensor Perceptual(const std::vector<Tensor>& a, const std::vector<Tensor>& b, std::span<const float> weights);

// Runs both image batches through the encoder's backbone first.
Tensor PerceptualImages(const VisionEncoder& encoder, const Tensor& a, const Tensor& b,
                        std::span<const float> weights);

// Batch mean of game + lambda * perceptual. `perceptual` may be undefined.
Tensor TotalLoss(const Tensor& game, const Tensor& perceptual, float lambda);

}  // namespace sketchcomm

#endif  // SKETCHCOMM_LOSSES_HPP_
