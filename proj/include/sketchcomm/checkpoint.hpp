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

// Checkpoint container, all integers little-endian:
//
//   "SKCM"  u32 version
//   u64 metadata length, metadata (UTF-8 JSON)
//   u32 tensor count, then per tensor:
//     u32 name length, name, u32 rank, rank x i64 dims, float32 values
//
// Adam moments are stored as ordinary tensors named "adam.m.<param>" and
// "adam.v.<param>".

#ifndef SKETCHCOMM_CHECKPOINT_HPP_
#define SKETCHCOMM_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>

#include "sketchcomm/tensor.hpp"

namespace sketchcomm {

inline constexpr uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointData {
  nlohmann::json metadata;
  std::map<std::string, Tensor> tensors;
  std::vector<std::string> order;  // tensor names as stored
};

void SaveCheckpointFile(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData LoadCheckpointFile(const std::filesystem::path& path);

std::string EncodeCheckpoint(const CheckpointData& data);
CheckpointData DecodeCheckpoint(const std::string& bytes);

}  // namespace sketchcomm

#endif  // SKETCHCOMM_CHECKPOINT_HPP_
