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

#ifndef SKETCHCOMM_ADAM_HPP_
#define SKETCHCOMM_ADAM_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sketchcomm/tensor.hpp"

namespace sketchcomm {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

using ParamList = std::vector<NamedTensor>;

struct AdamOptions {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Adam with bias correction. Moments live alongside the registered
// parameters; gradients are read but never cleared here.
class Adam {
 public:
  Adam(ParamList params, AdamOptions options);

  // Throws std::logic_error if a registered parameter has no gradient.
  void Step();
  void ZeroGrad();

  const ParamList& params() const { return params_; }
  const AdamOptions& options() const { return options_; }
  void set_lr(float lr) { options_.lr = lr; }
  int64_t step_count() const { return step_; }

  // Moment state for checkpointing, in registration order.
  std::vector<std::vector<float>>& first_moments() { return m_; }
  std::vector<std::vector<float>>& second_moments() { return v_; }
  const std::vector<std::vector<float>>& first_moments() const { return m_; }
  const std::vector<std::vector<float>>& second_moments() const { return v_; }
  void set_step_count(int64_t step) { step_ = step; }

 private:
  ParamList params_;
  AdamOptions options_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  int64_t step_ = 0;
};

}  // namespace sketchcomm

#endif  // SKETCHCOMM_ADAM_HPP_
