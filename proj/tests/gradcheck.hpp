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

// Analytic gradients of every differentiable op against central differences
// of independent float64 reference implementations.

#ifndef SKETCHCOMM_TESTS_GRADCHECK_HPP_
#define SKETCHCOMM_TESTS_GRADCHECK_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace sketchcomm::testing {

inline constexpr double kGradRelTol = 1e-3;
inline constexpr double kGradAbsFloor = 1e-6;

struct GradReport {
  std::string op;
  int configs = 0;
  int failures = 0;
  int64_t entries = 0;
  double worst_excess = 0.0;  // max |a-n| / max(tol*max(|a|,|n|), floor)
  std::string first_failure;
};

bool GradClose(double analytic, double numeric);

std::vector<GradReport> RunGradientSuite(int configs_per_op, uint64_t seed);

}  // namespace sketchcomm::testing

#endif  // SKETCHCOMM_TESTS_GRADCHECK_HPP_
