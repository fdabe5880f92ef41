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

#ifndef SKETCHCOMM_IMAGE_HPP_
#define SKETCHCOMM_IMAGE_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace sketchcomm {

// 8-bit interleaved image, row-major HWC.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<uint8_t> pixels;

  uint8_t at(int row, int col, int channel) const {
    return pixels[(static_cast<size_t>(row) * width + col) * channels + channel];
  }
  bool operator==(const Image&) const = default;
};

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// PNG codec. Decoding always yields 8-bit RGB (greyscale and palette images
// are expanded, alpha is dropped).
Image ReadPng(const std::filesystem::path& path);
Image DecodePng(std::span<const uint8_t> bytes);
void WritePng(const Image& image, const std::filesystem::path& path);
std::vector<uint8_t> EncodePng(const Image& image);

Image ToRgb(const Image& image);
// Largest centered square.
Image CenterSquareCrop(const Image& image);
// Bilinear with half-pixel centers; identity when the size is unchanged.
Image ResizeBilinear(const Image& image, int width, int height);

}  // namespace sketchcomm

#endif  // SKETCHCOMM_IMAGE_HPP_
