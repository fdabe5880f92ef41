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

#include "sketchcomm/losses.hpp"

#include <algorithm>
#include <stdexcept>

#include "sketchcomm/ops.hpp"

namespace sketchcomm {

std::string PerceptualTargetName(PerceptualTarget target) {
  switch (target) {
    case PerceptualTarget::kMatchedPhoto:
      return "matched_photo";
    case PerceptualTarget::kFixedImage:
      return "fixed_image";
    case PerceptualTarget::kNone:
      return "none";
  }
  return "unknown";
}

PerceptualTarget ParsePerceptualTarget(const std::string& name) {
  if (name == "matched_photo") return PerceptualTarget::kMatchedPhoto;
  if (name == "fixed_image") return PerceptualTarget::kFixedImage;
  if (name == "none") return PerceptualTarget::kNone;
  throw std::invalid_argument("unknown perceptual target '" + name + "'");
}

void LossConfig::Validate(size_t layers) const {
  if (lambda < 0.0f) throw std::invalid_argument("loss: lambda must be >= 0");
  if (weights.size() != layers) {
    throw std::invalid_argument("loss: " + std::to_string(weights.size()) + " layer weights for " +
                                std::to_string(layers) + " tapped layers");
  }
  for (float w : weights) {
    if (w < 0.0f) throw std::invalid_argument("loss: layer weights must be >= 0");
  }
  if (target == PerceptualTarget::kFixedImage && fixed_image.empty()) {
    throw std::invalid_argument("loss: fixed_image target needs an image path");
  }
}

float MultiMargin(std::span<const float> scores, int target) {
  if (scores.size() < 2) throw std::invalid_argument("multi_margin: need at least two scores");
  if (target < 0 || target >= static_cast<int>(scores.size())) {
    throw std::invalid_argument("multi_margin: target " + std::to_string(target) + " out of range");
  }
  const float xy = scores[static_cast<size_t>(target)];
  float loss = 0.0f;
  for (size_t j = 0; j < scores.size(); ++j) {
    if (static_cast<int>(j) == target) continue;
    const float m = 1.0f - xy + scores[j];
    if (m > 0.0f) loss += m;
  }
  return loss;
}

Tensor MultiMargin(const Tensor& scores, const std::vector<int>& targets) {
  if (scores.rank() != 2) throw ShapeError("multi_margin: expected [B, P], got " + ShapeToString(scores.shape()));
  const int64_t b = scores.dim(0), p = scores.dim(1);
  if (static_cast<int64_t>(targets.size()) != b) {
    throw ShapeError("multi_margin: " + std::to_string(targets.size()) + " targets for " + std::to_string(b) +
                     " rows");
  }
  std::vector<float> out(static_cast<size_t>(b));
  for (int64_t i = 0; i < b; ++i) {
    out[static_cast<size_t>(i)] = MultiMargin(scores.data().subspan(static_cast<size_t>(i * p), static_cast<size_t>(p)),
                                              targets[static_cast<size_t>(i)]);
  }
  auto in = scores.impl();
  return MakeResult("MultiMargin", {b}, std::move(out), {scores}, [in, targets, b, p](TensorImpl& o) {
    auto g = in->grad_buffer();
    for (int64_t i = 0; i < b; ++i) {
      const float* x = in->data.data() + i * p;
      float* gx = g.data() + i * p;
      const int y = targets[static_cast<size_t>(i)];
      const float go = o.grad[static_cast<size_t>(i)];
      for (int64_t j = 0; j < p; ++j) {
        if (j == y) continue;
        if (1.0f - x[y] + x[j] > 0.0f) {
          gx[j] += go;
          gx[y] -= go;
        }
      }
    }
  });
}

Tensor Perceptual(const std::vector<Tensor>& a, const std::vector<Tensor>& b, std::span<const float> weights) {
  if (a.size() != weights.size() || b.size() != weights.size()) {
    throw std::invalid_argument("perceptual: " + std::to_string(weights.size()) + " weights for stacks of " +
                                std::to_string(a.size()) + " and " + std::to_string(b.size()) + " layers");
  }
  if (a.empty()) throw std::invalid_argument("perceptual: empty feature stack");
  Tensor total;
  for (size_t l = 0; l < a.size(); ++l) {
    if (a[l].rank() != 4) throw ShapeError("perceptual: expected [N, C, H, W], got " + ShapeToString(a[l].shape()));
    const int64_t n = std::max(a[l].dim(0), b[l].dim(0));
    if (weights[l] == 0.0f) {
      if (!total.defined()) total = Tensor::Zeros({n});
      continue;
    }
    Tensor diff = ops::Sub(ops::NormalizeChannels(a[l]), ops::NormalizeChannels(b[l]));
    Tensor per_sample = ops::Sum(ops::Square(diff), {1, 2, 3}, false);
    const float scale = weights[l] / static_cast<float>(a[l].dim(2) * a[l].dim(3));
    Tensor term = ops::Scale(per_sample, scale);
    total = total.defined() ? ops::Add(total, term) : term;
  }
  return total;
}

Tensor PerceptualImages(const VisionEncoder& encoder, const Tensor& a, const Tensor& b,
                        std::span<const float> weights) {
  return Perceptual(encoder.FeatureStack(a), encoder.FeatureStack(b), weights);
}

Tensor TotalLoss(const Tensor& game, const Tensor& perceptual, float lambda) {
  if (!perceptual.defined() || lambda == 0.0f) return ops::Mean(game);
  return ops::Mean(ops::Add(game, ops::Scale(perceptual, lambda)));
}

}  // namespace sketchcomm
