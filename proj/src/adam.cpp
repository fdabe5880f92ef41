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

#include "sketchcomm/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace sketchcomm {

Adam::Adam(ParamList params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.emplace_back(static_cast<size_t>(p.tensor.numel()), 0.0f);
    v_.emplace_back(static_cast<size_t>(p.tensor.numel()), 0.0f);
  }
}

void Adam::Step() {
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) {
      throw std::logic_error("adam: parameter '" + p.name + "' has no gradient");
    }
  }
  ++step_;
  const double c1 = 1.0 - std::pow(static_cast<double>(options_.beta1), static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(static_cast<double>(options_.beta2), static_cast<double>(step_));
  const float b1 = options_.beta1, b2 = options_.beta2;
  const float step_size = static_cast<float>(options_.lr / c1);
  const float inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(c2));
  for (size_t k = 0; k < params_.size(); ++k) {
    Tensor t = params_[k].tensor;
    std::span<float> w = t.mutable_data();
    std::span<const float> g = t.grad();
    std::vector<float>& m = m_[k];
    std::vector<float>& v = v_[k];
    for (size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      w[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + options_.eps);
    }
  }
}

void Adam::ZeroGrad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace sketchcomm
