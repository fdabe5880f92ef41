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

// Differentiable stroke rasterization.
//
// Each primitive i is turned into a squared distance field d_i over the
// pixel-center grid, relaxed to R_i = exp(-d_i / sigma2), and the primitives
// are composed onto a white canvas as S = prod_i (1 - R_i). The canvas spans
// [-1, 1]^2 with (-1, -1) at the top-left corner; pixel (r, c) samples
//   x = -1 + (2c + 1) / W,   y = -1 + (2r + 1) / H.

#ifndef SKETCHCOMM_RASTER_HPP_
#define SKETCHCOMM_RASTER_HPP_

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "sketchcomm/tensor.hpp"

namespace sketchcomm {

enum class Primitive { kLine, kPoint };

// Coordinates per primitive: 4 for a line (sx, sy, ex, ey), 2 for a point.
int PrimitiveArity(Primitive primitive);
std::string_view PrimitiveName(Primitive primitive);
Primitive ParsePrimitive(std::string_view name);

struct RasterConfig {
  int width = 48;
  int height = 48;
  float sigma2 = 5e-4f;

  // Throws std::invalid_argument on non-positive sizes or sigma2.
  void Validate() const;
};

struct Point2 {
  float x = 0.0f;
  float y = 0.0f;
};

struct StrokeSet {
  Primitive primitive = Primitive::kLine;
  std::vector<float> coords;  // count() * arity values

  int count() const { return static_cast<int>(coords.size()) / PrimitiveArity(primitive); }
};

struct SketchRaster {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;  // row-major, 1 = white, 0 = full ink

  float at(int row, int col) const { return pixels[static_cast<size_t>(row * width + col)]; }
};

float GridX(int col, int width);
float GridY(int row, int height);

// Squared distance from p to the segment [s, e]; a zero-length segment is a
// point.
float SquaredDistToSegment(Point2 s, Point2 e, Point2 p);
std::vector<float> SquaredDistToSegment(Point2 s, Point2 e, const RasterConfig& config);
std::vector<float> SquaredDistToPoint(Point2 c, const RasterConfig& config);

std::vector<float> RasterizePrimitive(std::span<const float> dist2, float sigma2);

// Empty `rasters` yields an all-white canvas of `pixel_count` pixels.
std::vector<float> ComposeSoftOr(const std::vector<std::vector<float>>& rasters,
                                 size_t pixel_count);

SketchRaster Render(const StrokeSet& strokes, const RasterConfig& config);
SketchRaster RasterizePoints(std::span<const float> points, const RasterConfig& config);

// Gradient of sum(upstream * S) with respect to the stroke coordinates.
std::vector<float> RasterBackward(const StrokeSet& strokes, std::span<const float> upstream,
                                  const RasterConfig& config);

// Differentiable batch rasterizer: coords [B, n * arity] -> sketches
// [B, 1, H, W]. A batch with n = 0 renders blank canvases.
Tensor RasterizeBatch(const Tensor& coords, Primitive primitive, const RasterConfig& config);

// 8-bit greyscale PNG with value round(255 * pixel).
void WriteSketchPng(const SketchRaster& raster, const std::filesystem::path& path);
std::vector<unsigned char> SketchToGrey8(const SketchRaster& raster);

}  // namespace sketchcomm

#endif  // SKETCHCOMM_RASTER_HPP_
