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

#include "sketchcomm/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace sketchcomm {

namespace {

struct ReadCursor {
  std::span<const uint8_t> bytes;
  size_t offset = 0;
};

void ReadFromCursor(png_structp png, png_bytep out, png_size_t length) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + length > cursor->bytes.size()) png_error(png, "truncated PNG data");
  std::memcpy(out, cursor->bytes.data() + cursor->offset, length);
  cursor->offset += length;
}

void WriteToVector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void FlushNothing(png_structp) {}

void ThrowOnError(png_structp, png_const_charp message) { throw ImageError(message); }
void IgnoreWarning(png_structp, png_const_charp) {}

}  // namespace

Image DecodePng(std::span<const uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw ImageError("not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, ThrowOnError, IgnoreWarning);
  if (!png) throw ImageError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  Image image;
  try {
    ReadCursor cursor{bytes, 0};
    png_set_read_fn(png, &cursor, ReadFromCursor);
    png_read_info(png, info);
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    image.width = static_cast<int>(png_get_image_width(png, info));
    image.height = static_cast<int>(png_get_image_height(png, info));
    image.channels = 3;
    if (png_get_rowbytes(png, info) != static_cast<size_t>(image.width) * 3) {
      throw ImageError("unsupported PNG pixel layout");
    }
    image.pixels.resize(static_cast<size_t>(image.width) * image.height * 3);
    std::vector<png_bytep> rows(static_cast<size_t>(image.height));
    for (int r = 0; r < image.height; ++r) rows[static_cast<size_t>(r)] = image.pixels.data() + static_cast<size_t>(r) * image.width * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

Image ReadPng(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return DecodePng(bytes);
  } catch (const ImageError& e) {
    throw ImageError(path.string() + ": " + e.what());
  }
}

std::vector<uint8_t> EncodePng(const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw ImageError("PNG encode supports 1 or 3 channels");
  if (image.pixels.size() != static_cast<size_t>(image.width) * image.height * image.channels) {
    throw ImageError("PNG encode: pixel buffer size mismatch");
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, ThrowOnError, IgnoreWarning);
  if (!png) throw ImageError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<uint8_t> out;
  try {
    png_set_write_fn(png, &out, WriteToVector, FlushNothing);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const size_t stride = static_cast<size_t>(image.width) * image.channels;
    for (int r = 0; r < image.height; ++r) {
      png_write_row(png, const_cast<png_bytep>(image.pixels.data() + stride * r));
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

void WritePng(const Image& image, const std::filesystem::path& path) {
  const std::vector<uint8_t> bytes = EncodePng(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageError("short write to " + path.string());
}

Image ToRgb(const Image& image) {
  if (image.channels == 3) return image;
  if (image.channels != 1) throw ImageError("ToRgb: unsupported channel count");
  Image rgb{image.width, image.height, 3, {}};
  rgb.pixels.reserve(image.pixels.size() * 3);
  for (uint8_t v : image.pixels) rgb.pixels.insert(rgb.pixels.end(), {v, v, v});
  return rgb;
}

Image CenterSquareCrop(const Image& image) {
  const int side = std::min(image.width, image.height);
  const int x0 = (image.width - side) / 2;
  const int y0 = (image.height - side) / 2;
  Image out{side, side, image.channels, {}};
  out.pixels.resize(static_cast<size_t>(side) * side * image.channels);
  const size_t row = static_cast<size_t>(side) * image.channels;
  for (int r = 0; r < side; ++r) {
    const uint8_t* src = image.pixels.data() + ((static_cast<size_t>(y0 + r) * image.width) + x0) * image.channels;
    std::copy(src, src + row, out.pixels.begin() + static_cast<std::ptrdiff_t>(row * r));
  }
  return out;
}

Image ResizeBilinear(const Image& image, int width, int height) {
  if (width == image.width && height == image.height) return image;
  Image out{width, height, image.channels, {}};
  out.pixels.resize(static_cast<size_t>(width) * height * image.channels);
  const float sx = static_cast<float>(image.width) / width;
  const float sy = static_cast<float>(image.height) / height;
  for (int r = 0; r < height; ++r) {
    const float fy = std::clamp((r + 0.5f) * sy - 0.5f, 0.0f, static_cast<float>(image.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const float wy = fy - y0;
    for (int c = 0; c < width; ++c) {
      const float fx = std::clamp((c + 0.5f) * sx - 0.5f, 0.0f, static_cast<float>(image.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const float wx = fx - x0;
      for (int ch = 0; ch < image.channels; ++ch) {
        const float v = (1 - wy) * ((1 - wx) * image.at(y0, x0, ch) + wx * image.at(y0, x1, ch)) +
                        wy * ((1 - wx) * image.at(y1, x0, ch) + wx * image.at(y1, x1, ch));
        out.pixels[(static_cast<size_t>(r) * width + c) * image.channels + ch] =
            static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

}  // namespace sketchcomm
