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

#include "sketchcomm/raster.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "sketchcomm/image.hpp"

namespace sketchcomm {

int PrimitiveArity(Primitive primitive) { return primitive == Primitive::kLine ? 4 : 2; }

std::string_view PrimitiveName(Primitive primitive) {
  return primitive == Primitive::kLine ? "line" : "point";
}

Primitive ParsePrimitive(std::string_view name) {
  if (name == "line" || name == "lines") return Primitive::kLine;
  if (name == "point" || name == "points") return Primitive::kPoint;
  throw std::invalid_argument("unknown primitive '" + std::string(name) + "'");
}

void RasterConfig::Validate() const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("raster: canvas size must be positive");
  if (!(sigma2 > 0.0f)) throw std::invalid_argument("raster: sigma2 must be positive");
}

// Numerator is an exact integer, so column c and W-1-c map to exact negatives.
float GridX(int col, int width) {
  return static_cast<float>(2 * col + 1 - width) / static_cast<float>(width);
}

float GridY(int row, int height) {
  return static_cast<float>(2 * row + 1 - height) / static_cast<float>(height);
}

namespace {

// Closest point on [s, e] to p, as the clamped segment parameter.
struct Projection {
  float t;
  float dx;  // p - q
  float dy;
};

inline Projection Project(Point2 s, Point2 e, Point2 p) {
  const float vx = e.x - s.x, vy = e.y - s.y;
  const float wx = p.x - s.x, wy = p.y - s.y;
  const float vv = vx * vx + vy * vy;
  float t = 0.0f;
  if (vv > 0.0f) t = std::clamp((wx * vx + wy * vy) / vv, 0.0f, 1.0f);
  return {t, wx - t * vx, wy - t * vy};
}

// Per-primitive distance fields for one stroke set.
std::vector<float> DistanceFields(const StrokeSet& strokes, const RasterConfig& config) {
  const int n = strokes.count();
  const int arity = PrimitiveArity(strokes.primitive);
  const size_t pixels = static_cast<size_t>(config.width) * static_cast<size_t>(config.height);
  std::vector<float> fields(pixels * static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const float* c = strokes.coords.data() + i * arity;
    float* dst = fields.data() + pixels * static_cast<size_t>(i);
    for (int r = 0; r < config.height; ++r) {
      const float y = GridY(r, config.height);
      for (int col = 0; col < config.width; ++col) {
        const Point2 p{GridX(col, config.width), y};
        float d2;
        if (strokes.primitive == Primitive::kLine) {
          const Projection pr = Project({c[0], c[1]}, {c[2], c[3]}, p);
          d2 = pr.dx * pr.dx + pr.dy * pr.dy;
        } else {
          const float dx = p.x - c[0], dy = p.y - c[1];
          d2 = dx * dx + dy * dy;
        }
        dst[r * config.width + col] = d2;
      }
    }
  }
  return fields;
}

void RenderInto(const StrokeSet& strokes, const RasterConfig& config, float* out) {
  const size_t pixels = static_cast<size_t>(config.width) * static_cast<size_t>(config.height);
  std::fill(out, out + pixels, 1.0f);
  const int n = strokes.count();
  if (n == 0) return;
  const std::vector<float> fields = DistanceFields(strokes, config);
  const float inv = 1.0f / config.sigma2;
  for (int i = 0; i < n; ++i) {
    const float* d = fields.data() + pixels * static_cast<size_t>(i);
    for (size_t k = 0; k < pixels; ++k) out[k] *= 1.0f - std::exp(-d[k] * inv);
  }
}

// Backward state, all in double.
struct ProjectionD {
  double t;
  double dx;
  double dy;
};

inline ProjectionD ProjectD(const float* c, double px, double py) {
  const double sx = c[0], sy = c[1];
  const double vx = c[2] - sx, vy = c[3] - sy;
  const double wx = px - sx, wy = py - sy;
  const double vv = vx * vx + vy * vy;
  double t = 0.0;
  if (vv > 0.0) t = std::clamp((wx * vx + wy * vy) / vv, 0.0, 1.0);
  return {t, wx - t * vx, wy - t * vy};
}

void BackwardInto(const StrokeSet& strokes, const float* upstream, const RasterConfig& config,
                  float* grad) {
  const int n = strokes.count();
  if (n == 0) return;
  const int arity = PrimitiveArity(strokes.primitive);
  const bool line = strokes.primitive == Primitive::kLine;
  const size_t pixels = static_cast<size_t>(config.width) * static_cast<size_t>(config.height);
  const double inv = 1.0 / static_cast<double>(config.sigma2);
  std::vector<double> gx(static_cast<size_t>(config.width)), gy(static_cast<size_t>(config.height));
  for (int col = 0; col < config.width; ++col) gx[static_cast<size_t>(col)] = static_cast<double>(2 * col + 1 - config.width) / config.width;
  for (int row = 0; row < config.height; ++row) gy[static_cast<size_t>(row)] = static_cast<double>(2 * row + 1 - config.height) / config.height;

  // ink[i] = R_i and its projection data, per pixel.
  std::vector<double> ink(pixels * static_cast<size_t>(n));
  std::vector<ProjectionD> proj(pixels * static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const float* c = strokes.coords.data() + i * arity;
    for (int row = 0; row < config.height; ++row) {
      for (int col = 0; col < config.width; ++col) {
        const size_t k = pixels * static_cast<size_t>(i) + static_cast<size_t>(row * config.width + col);
        const double px = gx[static_cast<size_t>(col)], py = gy[static_cast<size_t>(row)];
        ProjectionD pr = line ? ProjectD(c, px, py) : ProjectionD{0.0, px - c[0], py - c[1]};
        proj[k] = pr;
        ink[k] = std::exp(-(pr.dx * pr.dx + pr.dy * pr.dy) * inv);
      }
    }
  }

  // Leave-one-out products of (1 - R_j): prefix pass stores, suffix pass
  // consumes. No division, so saturated pixels (R = 1) stay finite.
  std::vector<double> prefix(ink.size());
  std::vector<double> running(pixels, 1.0);
  for (int i = 0; i < n; ++i) {
    double* pre = prefix.data() + pixels * static_cast<size_t>(i);
    const double* r = ink.data() + pixels * static_cast<size_t>(i);
    for (size_t k = 0; k < pixels; ++k) {
      pre[k] = running[k];
      running[k] *= 1.0 - r[k];
    }
  }
  std::fill(running.begin(), running.end(), 1.0);
  for (int i = n - 1; i >= 0; --i) {
    const double* pre = prefix.data() + pixels * static_cast<size_t>(i);
    const double* r = ink.data() + pixels * static_cast<size_t>(i);
    const ProjectionD* pj = proj.data() + pixels * static_cast<size_t>(i);
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    for (size_t k = 0; k < pixels; ++k) {
      // dL/dd = g * L_i * R_i / sigma2, since dS/dR_i = -L_i, dR/dd = -R/sigma2.
      const double a = -2.0 * upstream[k] * pre[k] * running[k] * r[k] * inv;
      if (a == 0.0) continue;
      if (line) {
        // Envelope rule: dd/ds = -2(1-t)(p-q), dd/de = -2t(p-q); holds on
        // clamped branches too since t is then constant.
        acc[0] += a * (1.0 - pj[k].t) * pj[k].dx;
        acc[1] += a * (1.0 - pj[k].t) * pj[k].dy;
        acc[2] += a * pj[k].t * pj[k].dx;
        acc[3] += a * pj[k].t * pj[k].dy;
      } else {
        acc[0] += a * pj[k].dx;
        acc[1] += a * pj[k].dy;
      }
    }
    for (size_t k = 0; k < pixels; ++k) running[k] *= 1.0 - r[k];
    for (int j = 0; j < arity; ++j) grad[i * arity + j] += static_cast<float>(acc[j]);
  }
}

}  // namespace

float SquaredDistToSegment(Point2 s, Point2 e, Point2 p) {
  const Projection pr = Project(s, e, p);
  return pr.dx * pr.dx + pr.dy * pr.dy;
}

std::vector<float> SquaredDistToSegment(Point2 s, Point2 e, const RasterConfig& config) {
  config.Validate();
  return DistanceFields(StrokeSet{Primitive::kLine, {s.x, s.y, e.x, e.y}}, config);
}

std::vector<float> SquaredDistToPoint(Point2 c, const RasterConfig& config) {
  config.Validate();
  return DistanceFields(StrokeSet{Primitive::kPoint, {c.x, c.y}}, config);
}

std::vector<float> RasterizePrimitive(std::span<const float> dist2, float sigma2) {
  if (!(sigma2 > 0.0f)) throw std::invalid_argument("raster: sigma2 must be positive");
  std::vector<float> out(dist2.size());
  const float inv = 1.0f / sigma2;
  for (size_t k = 0; k < dist2.size(); ++k) out[k] = std::exp(-dist2[k] * inv);
  return out;
}

std::vector<float> ComposeSoftOr(const std::vector<std::vector<float>>& rasters,
                                 size_t pixel_count) {
  std::vector<float> out(pixel_count, 1.0f);
  for (const auto& r : rasters) {
    if (r.size() != pixel_count) {
      throw ShapeError("compose_soft_or: raster of " + std::to_string(r.size()) +
                       " pixels, expected " + std::to_string(pixel_count));
    }
    for (size_t k = 0; k < pixel_count; ++k) out[k] *= 1.0f - r[k];
  }
  return out;
}

SketchRaster Render(const StrokeSet& strokes, const RasterConfig& config) {
  config.Validate();
  if (strokes.coords.size() % static_cast<size_t>(PrimitiveArity(strokes.primitive)) != 0) {
    throw ShapeError("render: coordinate count " + std::to_string(strokes.coords.size()) +
                     " is not a multiple of the primitive arity");
  }
  SketchRaster raster{config.width, config.height, {}};
  raster.pixels.resize(static_cast<size_t>(config.width) * static_cast<size_t>(config.height));
  RenderInto(strokes, config, raster.pixels.data());
  return raster;
}

SketchRaster RasterizePoints(std::span<const float> points, const RasterConfig& config) {
  return Render(StrokeSet{Primitive::kPoint, {points.begin(), points.end()}}, config);
}

std::vector<float> RasterBackward(const StrokeSet& strokes, std::span<const float> upstream,
                                  const RasterConfig& config) {
  config.Validate();
  if (upstream.size() != static_cast<size_t>(config.width) * static_cast<size_t>(config.height)) {
    throw ShapeError("raster_backward: upstream size mismatch");
  }
  std::vector<float> grad(strokes.coords.size(), 0.0f);
  BackwardInto(strokes, upstream.data(), config, grad.data());
  return grad;
}

Tensor RasterizeBatch(const Tensor& coords, Primitive primitive, const RasterConfig& config) {
  config.Validate();
  const int arity = PrimitiveArity(primitive);
  if (coords.rank() != 2 || coords.dim(1) % arity != 0) {
    throw ShapeError("rasterize: coords shape " + ShapeToString(coords.shape()) +
                     " is not [batch, n*" + std::to_string(arity) + "]");
  }
  const int64_t batch = coords.dim(0);
  const int64_t per = coords.dim(1);
  const size_t pixels = static_cast<size_t>(config.width) * static_cast<size_t>(config.height);
  std::vector<float> out(static_cast<size_t>(batch) * pixels);
  for (int64_t b = 0; b < batch; ++b) {
    StrokeSet strokes{primitive, {coords.data().begin() + b * per, coords.data().begin() + (b + 1) * per}};
    RenderInto(strokes, config, out.data() + static_cast<size_t>(b) * pixels);
  }
  auto ci = coords.impl();
  return MakeResult("rasterize", {batch, 1, config.height, config.width}, std::move(out), {coords},
                    [ci, primitive, config, batch, per, pixels](TensorImpl& o) {
                      if (!ci->requires_grad) return;
                      float* g = ci->grad_buffer().data();
                      for (int64_t b = 0; b < batch; ++b) {
                        StrokeSet strokes{primitive, {ci->data.begin() + b * per, ci->data.begin() + (b + 1) * per}};
                        BackwardInto(strokes, o.grad.data() + static_cast<size_t>(b) * pixels, config,
                                     g + b * per);
                      }
                    });
}

std::vector<unsigned char> SketchToGrey8(const SketchRaster& raster) {
  std::vector<unsigned char> grey(raster.pixels.size());
  for (size_t k = 0; k < grey.size(); ++k) {
    const float v = std::clamp(raster.pixels[k], 0.0f, 1.0f);
    grey[k] = static_cast<unsigned char>(std::lround(255.0f * v));
  }
  return grey;
}

void WriteSketchPng(const SketchRaster& raster, const std::filesystem::path& path) {
  Image image{raster.width, raster.height, 1, SketchToGrey8(raster)};
  WritePng(image, path);
}

}  // namespace sketchcomm
