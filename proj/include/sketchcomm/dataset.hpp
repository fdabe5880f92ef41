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

#ifndef SKETCHCOMM_DATASET_HPP_
#define SKETCHCOMM_DATASET_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sketchcomm/image.hpp"
#include "sketchcomm/tensor.hpp"

namespace sketchcomm {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NormStats {
  std::array<float, 3> mean{0.0f, 0.0f, 0.0f};
  std::array<float, 3> std{1.0f, 1.0f, 1.0f};
};

// N equally sized RGB images with optional class labels.
struct Dataset {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // N * H * W * 3, HWC per image
  std::vector<int> labels;      // empty when unlabeled
  std::vector<std::string> class_names;
  std::string split = "train";

  size_t size() const;
  size_t image_bytes() const { return static_cast<size_t>(width) * height * 3; }
  std::span<const uint8_t> image_data(size_t index) const;
  Image image(size_t index) const;
  bool labeled() const { return !labels.empty(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }
  std::vector<std::vector<int>> IndicesByClass() const;

  void Append(const Image& image, std::optional<int> label);
  // Throws DataError if sizes or label ranges are inconsistent.
  void Validate() const;
};

enum class Palette { kMono, kColor };

struct SyntheticSpec {
  std::vector<std::string> classes = {"circle", "square",  "triangle", "cross",   "star",
                                      "ring",   "bar-h",   "bar-v",    "l-shape", "zigzag"};
  int resolution = 48;
  int train_per_class = 200;
  int test_per_class = 50;
  uint64_t seed = 1;
  Palette palette = Palette::kMono;
  // Jitter ranges, in canvas units where the canvas spans [-1, 1].
  float max_offset = 0.2f;
  float min_scale = 0.5f;
  float max_scale = 0.8f;
  float max_rotation = 0.26f;  // radians, either direction
  float min_thickness = 0.07f;
  float max_thickness = 0.13f;
};

const std::vector<std::string>& SyntheticShapeNames();

struct DatasetSplits {
  Dataset train;
  Dataset test;
};

// Train and test splits draw from distinct RNG streams of the same seed.
DatasetSplits GenerateSynthetic(const SyntheticSpec& spec);

// STL-10 binary layout: 27,648 bytes per image, three 96x96 planes (R, G, B),
// each plane column-major. Labels: one byte per image, 1..10.
inline constexpr int kStl10Side = 96;
inline constexpr size_t kStl10RecordBytes = 3 * 96 * 96;
Dataset LoadStl10(const std::filesystem::path& data_path,
                  const std::optional<std::filesystem::path>& label_path = std::nullopt);
void WriteStl10(const Dataset& dataset, const std::filesystem::path& data_path,
                const std::optional<std::filesystem::path>& label_path = std::nullopt);

struct ImageDirReport {
  size_t loaded = 0;
  size_t skipped = 0;
};

// Class subdirectories of PNG files (labels by sorted directory name), or a
// flat directory of PNGs for unlabeled use. Each image is center-cropped to
// a square and resized to `resolution`.
Dataset LoadImageDir(const std::filesystem::path& root, int resolution,
                     ImageDirReport* report = nullptr);
// Writes the class-subdirectory layout read by LoadImageDir.
void WriteImageDir(const Dataset& dataset, const std::filesystem::path& root);

// Per-channel mean/std of pixel/255. Throws DataError if any std < 1e-6.
NormStats ComputeStats(const Dataset& dataset);

// (pixel/255 - mean_c) / std_c, laid out CHW.
std::vector<float> NormalizeImage(std::span<const uint8_t> hwc, int width, int height,
                                  const NormStats& stats);
std::vector<float> DenormalizeImage(std::span<const float> chw, int width, int height,
                                    const NormStats& stats);
// [indices.size(), 3, H, W]
Tensor NormalizedBatch(const Dataset& dataset, std::span<const int> indices, const NormStats& stats);

void WriteManifest(const std::filesystem::path& path, const DatasetSplits& splits,
                   const NormStats& stats, const SyntheticSpec* spec);

}  // namespace sketchcomm

#endif  // SKETCHCOMM_DATASET_HPP_
