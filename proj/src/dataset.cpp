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

#include "sketchcomm/dataset.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <numbers>

#include "sketchcomm/raster.hpp"
#include "sketchcomm/rng.hpp"

namespace sketchcomm {

namespace fs = std::filesystem;

size_t Dataset::size() const {
  const size_t bytes = image_bytes();
  return bytes == 0 ? 0 : pixels.size() / bytes;
}

std::span<const uint8_t> Dataset::image_data(size_t index) const {
  return std::span<const uint8_t>(pixels).subspan(index * image_bytes(), image_bytes());
}

Image Dataset::image(size_t index) const {
  auto bytes = image_data(index);
  return Image{width, height, 3, {bytes.begin(), bytes.end()}};
}

std::vector<std::vector<int>> Dataset::IndicesByClass() const {
  if (!labeled()) throw DataError("dataset '" + split + "' has no labels");
  std::vector<std::vector<int>> by_class(static_cast<size_t>(num_classes()));
  for (size_t i = 0; i < labels.size(); ++i) by_class[static_cast<size_t>(labels[i])].push_back(static_cast<int>(i));
  return by_class;
}

void Dataset::Append(const Image& image, std::optional<int> label) {
  if (size() == 0 && pixels.empty()) {
    width = image.width;
    height = image.height;
  }
  if (image.width != width || image.height != height || image.channels != 3) {
    throw DataError("dataset: image size " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                    " does not match " + std::to_string(width) + "x" + std::to_string(height));
  }
  pixels.insert(pixels.end(), image.pixels.begin(), image.pixels.end());
  if (label) labels.push_back(*label);
}

void Dataset::Validate() const {
  if (width <= 0 || height <= 0) throw DataError("dataset: empty geometry");
  if (pixels.size() % image_bytes() != 0) throw DataError("dataset: pixel buffer is not a whole number of images");
  if (labeled()) {
    if (labels.size() != size()) throw DataError("dataset: label count does not match image count");
    for (int label : labels) {
      if (label < 0 || label >= num_classes()) {
        throw DataError("dataset: label " + std::to_string(label) + " outside [0, " +
                        std::to_string(num_classes()) + ")");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Synthetic shapes

const std::vector<std::string>& SyntheticShapeNames() {
  static const std::vector<std::string> names = SyntheticSpec{}.classes;
  return names;
}

namespace {

using Segment = std::array<Point2, 2>;

std::vector<Segment> Polyline(const std::vector<Point2>& points, bool closed) {
  std::vector<Segment> segments;
  for (size_t i = 0; i + 1 < points.size(); ++i) segments.push_back({points[i], points[i + 1]});
  if (closed && points.size() > 2) segments.push_back({points.back(), points.front()});
  return segments;
}

std::vector<Point2> Circle(float radius, int sides) {
  std::vector<Point2> points;
  for (int k = 0; k < sides; ++k) {
    const float a = 2.0f * std::numbers::pi_v<float> * static_cast<float>(k) / static_cast<float>(sides);
    points.push_back({radius * std::cos(a), radius * std::sin(a)});
  }
  return points;
}

// Outline of each class in a unit frame ([-1, 1]^2, y down).
std::vector<Segment> ShapeOutline(const std::string& name) {
  if (name == "circle") return Polyline(Circle(0.9f, 40), true);
  if (name == "square") return Polyline({{-0.8f, -0.8f}, {0.8f, -0.8f}, {0.8f, 0.8f}, {-0.8f, 0.8f}}, true);
  if (name == "triangle") return Polyline({{0.0f, -0.9f}, {0.85f, 0.7f}, {-0.85f, 0.7f}}, true);
  if (name == "cross") return {{Point2{-0.9f, 0.0f}, Point2{0.9f, 0.0f}}, {Point2{0.0f, -0.9f}, Point2{0.0f, 0.9f}}};
  if (name == "star") {
    std::vector<Point2> points;
    for (int k = 0; k < 10; ++k) {
      const float r = (k % 2 == 0) ? 0.95f : 0.4f;
      const float a = -std::numbers::pi_v<float> / 2 + std::numbers::pi_v<float> * static_cast<float>(k) / 5.0f;
      points.push_back({r * std::cos(a), r * std::sin(a)});
    }
    return Polyline(points, true);
  }
  if (name == "ring") {
    auto outer = Polyline(Circle(0.9f, 40), true);
    auto inner = Polyline(Circle(0.45f, 24), true);
    outer.insert(outer.end(), inner.begin(), inner.end());
    return outer;
  }
  if (name == "bar-h") {
    return {{Point2{-0.9f, -0.2f}, Point2{0.9f, -0.2f}}, {Point2{-0.9f, 0.2f}, Point2{0.9f, 0.2f}},
            {Point2{-0.9f, 0.0f}, Point2{0.9f, 0.0f}}};
  }
  if (name == "bar-v") {
    return {{Point2{-0.2f, -0.9f}, Point2{-0.2f, 0.9f}}, {Point2{0.2f, -0.9f}, Point2{0.2f, 0.9f}},
            {Point2{0.0f, -0.9f}, Point2{0.0f, 0.9f}}};
  }
  if (name == "l-shape") return Polyline({{-0.6f, -0.9f}, {-0.6f, 0.8f}, {0.7f, 0.8f}}, false);
  if (name == "zigzag") {
    return Polyline({{-0.9f, 0.6f}, {-0.45f, -0.6f}, {0.0f, 0.6f}, {0.45f, -0.6f}, {0.9f, 0.6f}}, false);
  }
  throw DataError("unknown synthetic shape class '" + name + "'");
}

struct Rgb {
  float r, g, b;
};

Rgb HueToRgb(float hue) {
  const float h = hue * 6.0f;
  const float x = 1.0f - std::fabs(std::fmod(h, 2.0f) - 1.0f);
  switch (static_cast<int>(h) % 6) {
    case 0: return {1, x, 0};
    case 1: return {x, 1, 0};
    case 2: return {0, 1, x};
    case 3: return {0, x, 1};
    case 4: return {x, 0, 1};
    default: return {1, 0, x};
  }
}

Image DrawShape(const std::vector<Segment>& outline, const SyntheticSpec& spec, Rng& rng) {
  const int side = spec.resolution;
  const float cx = rng.Uniform(-spec.max_offset, spec.max_offset);
  const float cy = rng.Uniform(-spec.max_offset, spec.max_offset);
  const float scale = rng.Uniform(spec.min_scale, spec.max_scale);
  const float angle = rng.Uniform(-spec.max_rotation, spec.max_rotation);
  const float half_width = 0.5f * rng.Uniform(spec.min_thickness, spec.max_thickness);
  Rgb ink{0, 0, 0};
  Rgb background{1, 1, 1};
  if (spec.palette == Palette::kMono) {
    const float level = rng.Uniform(0.0f, 0.3f);
    ink = {level, level, level};
  } else {
    const Rgb hue = HueToRgb(rng.UniformFloat());
    const float shade = rng.Uniform(0.3f, 0.7f);
    ink = {hue.r * shade, hue.g * shade, hue.b * shade};
    const Rgb tint = HueToRgb(rng.UniformFloat());
    background = {0.8f + 0.2f * tint.r, 0.8f + 0.2f * tint.g, 0.8f + 0.2f * tint.b};
  }
  const float c = std::cos(angle), s = std::sin(angle);
  std::vector<Segment> placed;
  for (const Segment& seg : outline) {
    Segment out;
    for (int k = 0; k < 2; ++k) {
      const float x = seg[k].x * scale, y = seg[k].y * scale;
      out[k] = {cx + c * x - s * y, cy + s * x + c * y};
    }
    placed.push_back(out);
  }
  const float pixel = 2.0f / static_cast<float>(side);
  Image image{side, side, 3, std::vector<uint8_t>(static_cast<size_t>(side) * side * 3)};
  for (int r = 0; r < side; ++r) {
    for (int col = 0; col < side; ++col) {
      const Point2 p{GridX(col, side), GridY(r, side)};
      float d2 = std::numeric_limits<float>::max();
      for (const Segment& seg : placed) d2 = std::min(d2, SquaredDistToSegment(seg[0], seg[1], p));
      const float coverage = std::clamp(0.5f - (std::sqrt(d2) - half_width) / pixel, 0.0f, 1.0f);
      const float rgb[3] = {background.r + (ink.r - background.r) * coverage,
                            background.g + (ink.g - background.g) * coverage,
                            background.b + (ink.b - background.b) * coverage};
      for (int ch = 0; ch < 3; ++ch) {
        image.pixels[(static_cast<size_t>(r) * side + col) * 3 + ch] =
            static_cast<uint8_t>(std::lround(255.0f * std::clamp(rgb[ch], 0.0f, 1.0f)));
      }
    }
  }
  return image;
}

Dataset GenerateSplit(const SyntheticSpec& spec, const std::vector<std::vector<Segment>>& outlines,
                      int per_class, uint64_t stream, const std::string& split) {
  Rng rng(spec.seed, stream);
  Dataset data;
  data.width = data.height = spec.resolution;
  data.class_names = spec.classes;
  data.split = split;
  const int classes = static_cast<int>(spec.classes.size());
  data.pixels.reserve(static_cast<size_t>(per_class) * classes * data.image_bytes());
  // Interleaved so any prefix is near-balanced.
  for (int k = 0; k < per_class; ++k) {
    for (int label = 0; label < classes; ++label) {
      data.Append(DrawShape(outlines[static_cast<size_t>(label)], spec, rng), label);
    }
  }
  return data;
}

}  // namespace

DatasetSplits GenerateSynthetic(const SyntheticSpec& spec) {
  if (spec.classes.size() < 2) throw DataError("synthetic: need at least two classes");
  if (spec.train_per_class <= 0 || spec.test_per_class <= 0) {
    throw DataError("synthetic: per-class counts must be positive");
  }
  if (spec.resolution < 8) throw DataError("synthetic: resolution must be at least 8");
  std::vector<std::vector<Segment>> outlines;
  for (const auto& name : spec.classes) outlines.push_back(ShapeOutline(name));
  return {GenerateSplit(spec, outlines, spec.train_per_class, 1, "train"),
          GenerateSplit(spec, outlines, spec.test_per_class, 2, "test")};
}

// ---------------------------------------------------------------------------
// STL-10

namespace {

std::vector<uint8_t> ReadFileBytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataError("cannot open " + path.string());
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<uint8_t> bytes(static_cast<size_t>(size));
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), size)) {
    throw DataError(path.string() + ": read failed");
  }
  return bytes;
}

}  // namespace

Dataset LoadStl10(const fs::path& data_path, const std::optional<fs::path>& label_path) {
  const std::vector<uint8_t> bytes = ReadFileBytes(data_path);
  if (bytes.size() % kStl10RecordBytes != 0) {
    const size_t whole = bytes.size() / kStl10RecordBytes;
    throw DataError(data_path.string() + ": size " + std::to_string(bytes.size()) +
                    " is not a multiple of " + std::to_string(kStl10RecordBytes) + "; truncated record at byte offset " +
                    std::to_string(whole * kStl10RecordBytes) + " (" +
                    std::to_string(bytes.size() - whole * kStl10RecordBytes) + " trailing bytes)");
  }
  const size_t count = bytes.size() / kStl10RecordBytes;
  if (count == 0) throw DataError(data_path.string() + ": no records");
  Dataset data;
  data.width = data.height = kStl10Side;
  data.pixels.resize(count * kStl10RecordBytes);
  constexpr size_t plane = static_cast<size_t>(kStl10Side) * kStl10Side;
  for (size_t n = 0; n < count; ++n) {
    const uint8_t* record = bytes.data() + n * kStl10RecordBytes;
    uint8_t* dst = data.pixels.data() + n * kStl10RecordBytes;
    for (int ch = 0; ch < 3; ++ch) {
      for (int col = 0; col < kStl10Side; ++col) {
        for (int row = 0; row < kStl10Side; ++row) {
          dst[(static_cast<size_t>(row) * kStl10Side + col) * 3 + ch] =
              record[ch * plane + static_cast<size_t>(col) * kStl10Side + row];
        }
      }
    }
  }
  if (label_path) {
    const std::vector<uint8_t> labels = ReadFileBytes(*label_path);
    if (labels.size() != count) {
      throw DataError(label_path->string() + ": " + std::to_string(labels.size()) + " labels for " +
                      std::to_string(count) + " images (expected " + std::to_string(count) +
                      " bytes, mismatch at byte offset " + std::to_string(std::min(labels.size(), count)) + ")");
    }
    for (size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 1 || labels[i] > 10) {
        throw DataError(label_path->string() + ": label " + std::to_string(labels[i]) + " at byte offset " +
                        std::to_string(i) + " outside 1..10");
      }
      data.labels.push_back(labels[i] - 1);
    }
    for (int k = 0; k < 10; ++k) data.class_names.push_back("class" + std::to_string(k + 1));
  }
  return data;
}

void WriteStl10(const Dataset& dataset, const fs::path& data_path, const std::optional<fs::path>& label_path) {
  if (dataset.width != kStl10Side || dataset.height != kStl10Side) {
    throw DataError("stl10: dataset must be 96x96");
  }
  constexpr size_t plane = static_cast<size_t>(kStl10Side) * kStl10Side;
  std::vector<uint8_t> bytes(dataset.size() * kStl10RecordBytes);
  for (size_t n = 0; n < dataset.size(); ++n) {
    const uint8_t* src = dataset.image_data(n).data();
    uint8_t* record = bytes.data() + n * kStl10RecordBytes;
    for (int ch = 0; ch < 3; ++ch) {
      for (int col = 0; col < kStl10Side; ++col) {
        for (int row = 0; row < kStl10Side; ++row) {
          record[ch * plane + static_cast<size_t>(col) * kStl10Side + row] =
              src[(static_cast<size_t>(row) * kStl10Side + col) * 3 + ch];
        }
      }
    }
  }
  std::ofstream out(data_path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write " + data_path.string());
  if (label_path) {
    std::vector<uint8_t> labels;
    for (int label : dataset.labels) labels.push_back(static_cast<uint8_t>(label + 1));
    std::ofstream lout(*label_path, std::ios::binary);
    lout.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
    if (!lout) throw DataError("cannot write " + label_path->string());
  }
}

// ---------------------------------------------------------------------------
// Image directories

namespace {

std::vector<fs::path> SortedPngs(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

Dataset LoadImageDir(const fs::path& root, int resolution, ImageDirReport* report) {
  if (!fs::is_directory(root)) throw DataError(root.string() + " is not a directory");
  if (resolution <= 0) throw DataError("image dir: resolution must be positive");
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());

  Dataset data;
  data.width = data.height = resolution;
  data.split = root.filename().string();
  ImageDirReport local;
  auto ingest = [&](const fs::path& file, std::optional<int> label) {
    try {
      Image img = ResizeBilinear(CenterSquareCrop(ReadPng(file)), resolution, resolution);
      data.Append(img, label);
      ++local.loaded;
    } catch (const ImageError& e) {
      spdlog::warn("skipping unreadable image {}: {}", file.string(), e.what());
      ++local.skipped;
    }
  };
  if (!class_dirs.empty()) {
    for (size_t label = 0; label < class_dirs.size(); ++label) {
      data.class_names.push_back(class_dirs[label].filename().string());
      for (const auto& file : SortedPngs(class_dirs[label])) ingest(file, static_cast<int>(label));
    }
  } else {
    for (const auto& file : SortedPngs(root)) ingest(file, std::nullopt);
  }
  if (report) *report = local;
  if (data.size() == 0) throw DataError(root.string() + ": no readable PNG images");
  return data;
}

void WriteImageDir(const Dataset& dataset, const fs::path& root) {
  fs::create_directories(root);
  for (size_t i = 0; i < dataset.size(); ++i) {
    fs::path dir = root;
    if (dataset.labeled()) dir /= dataset.class_names[static_cast<size_t>(dataset.labels[i])];
    fs::create_directories(dir);
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.png", i);
    WritePng(dataset.image(i), dir / name);
  }
}

// ---------------------------------------------------------------------------
// Normalization

NormStats ComputeStats(const Dataset& dataset) {
  if (dataset.size() == 0) throw DataError("stats: empty dataset");
  std::array<double, 3> sum{0, 0, 0}, sq{0, 0, 0};
  const size_t pixels = dataset.pixels.size() / 3;
  for (size_t p = 0; p < pixels; ++p) {
    for (int ch = 0; ch < 3; ++ch) {
      const double v = dataset.pixels[p * 3 + static_cast<size_t>(ch)] / 255.0;
      sum[static_cast<size_t>(ch)] += v;
      sq[static_cast<size_t>(ch)] += v * v;
    }
  }
  NormStats stats;
  for (size_t ch = 0; ch < 3; ++ch) {
    const double mean = sum[ch] / static_cast<double>(pixels);
    const double var = std::max(0.0, sq[ch] / static_cast<double>(pixels) - mean * mean);
    const double sd = std::sqrt(var);
    if (sd < 1e-6) throw DataError("stats: channel " + std::to_string(ch) + " has zero variance");
    stats.mean[ch] = static_cast<float>(mean);
    stats.std[ch] = static_cast<float>(sd);
  }
  return stats;
}

std::vector<float> NormalizeImage(std::span<const uint8_t> hwc, int width, int height, const NormStats& stats) {
  const size_t plane = static_cast<size_t>(width) * height;
  if (hwc.size() != plane * 3) throw ShapeError("normalize_image: buffer size mismatch");
  std::vector<float> out(plane * 3);
  for (size_t ch = 0; ch < 3; ++ch) {
    const float inv = 1.0f / stats.std[ch];
    for (size_t p = 0; p < plane; ++p) {
      out[ch * plane + p] = (static_cast<float>(hwc[p * 3 + ch]) / 255.0f - stats.mean[ch]) * inv;
    }
  }
  return out;
}

std::vector<float> DenormalizeImage(std::span<const float> chw, int width, int height, const NormStats& stats) {
  const size_t plane = static_cast<size_t>(width) * height;
  if (chw.size() != plane * 3) throw ShapeError("denormalize_image: buffer size mismatch");
  std::vector<float> out(chw.size());
  for (size_t ch = 0; ch < 3; ++ch) {
    for (size_t p = 0; p < plane; ++p) out[ch * plane + p] = chw[ch * plane + p] * stats.std[ch] + stats.mean[ch];
  }
  return out;
}

Tensor NormalizedBatch(const Dataset& dataset, std::span<const int> indices, const NormStats& stats) {
  const size_t per = dataset.image_bytes();
  std::vector<float> data;
  data.reserve(indices.size() * per);
  for (int index : indices) {
    auto one = NormalizeImage(dataset.image_data(static_cast<size_t>(index)), dataset.width, dataset.height, stats);
    data.insert(data.end(), one.begin(), one.end());
  }
  return Tensor::FromData({static_cast<int64_t>(indices.size()), 3, dataset.height, dataset.width}, std::move(data));
}

void WriteManifest(const fs::path& path, const DatasetSplits& splits, const NormStats& stats,
                   const SyntheticSpec* spec) {
  nlohmann::json manifest;
  manifest["resolution"] = splits.train.width;
  manifest["classes"] = splits.train.class_names;
  manifest["counts"] = {{"train", splits.train.size()}, {"test", splits.test.size()}};
  manifest["stats"] = {{"mean", stats.mean}, {"std", stats.std}};
  if (spec) {
    manifest["generator"] = {{"seed", spec->seed},
                             {"palette", spec->palette == Palette::kMono ? "mono" : "color"},
                             {"train_per_class", spec->train_per_class},
                             {"test_per_class", spec->test_per_class}};
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << manifest.dump(2) << '\n';
}

}  // namespace sketchcomm
