// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "forge/digest.hpp"

namespace forge {

// Pixel-space axis-aligned box: (x, y) top-left, width and height.
struct Box {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  long long Area() const { return static_cast<long long>(w) * h; }
  bool Empty() const { return w <= 0 || h <= 0; }
  bool Within(int width, int height) const {
    return x >= 0 && y >= 0 && w > 0 && h > 0 && x + w <= width &&
           y + h <= height;
  }
  double CenterX() const { return x + w / 2.0; }
  double CenterY() const { return y + h / 2.0; }

  friend bool operator==(const Box&, const Box&) = default;
};

double IoU(const Box& a, const Box& b);

// Interleaved 8-bit RGB raster.
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, std::uint8_t fill = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  std::uint8_t* at(int x, int y) { return &pixels_[Offset(x, y)]; }
  const std::uint8_t* at(int x, int y) const { return &pixels_[Offset(x, y)]; }
  void Set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    std::uint8_t* p = at(x, y);
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t Offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// Single-channel 8-bit image.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
};

// PNG codec (8-bit RGB output). Decode accepts gray, palette and alpha
// inputs and converts them; throws Error(kDecodeFailure).
Bytes EncodePng(const Raster& image);
Raster DecodePng(std::span<const std::uint8_t> png);

// Copies `box`, which must lie within the image.
Raster Crop(const Raster& image, const Box& box);
Raster ResizeBilinear(const Raster& image, int width, int height);
GrayImage ToGray(const Raster& image);

// Places `left` and `right` side by side. When heights differ, `right` is
// scaled proportionally to the height of `left`; the scale applied to
// `right` is returned through `right_scale`.
Raster ConcatHorizontal(const Raster& left, const Raster& right,
                        double* right_scale = nullptr);

// Binary mask over a W x H grid, row-major.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  bool at(int x, int y) const {
    return bits[static_cast<std::size_t>(y) * width + x] != 0;
  }
  // Tight bounding box of set pixels; empty Box when none set.
  Box Bounds() const;
  std::size_t Count() const;
};

Mask BoxMask(int width, int height, const Box& box);

// Mask run-length encoding: "<H>x<W>:" followed by space-separated run
// lengths over the row-major pixels, alternating starting with unset pixels.
std::string EncodeMaskRle(const Mask& mask);
// Throws Error(kDecodeFailure).
Mask DecodeMaskRle(const std::string& rle);

}  // namespace forge
