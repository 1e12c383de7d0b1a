// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/raster.hpp"

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>

#include "forge/error.hpp"

namespace forge {

double IoU(const Box& a, const Box& b) {
  const int x0 = std::max(a.x, b.x);
  const int y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.x + a.w, b.x + b.w);
  const int y1 = std::min(a.y + a.h, b.y + b.h);
  if (x1 <= x0 || y1 <= y0) return 0.0;
  const double inter = static_cast<double>(x1 - x0) * (y1 - y0);
  const double uni = static_cast<double>(a.Area()) + b.Area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

Raster::Raster(int width, int height, std::uint8_t fill)
    : width_(width),
      height_(height),
      pixels_(static_cast<std::size_t>(width) * height * 3, fill) {
  if (width < 0 || height < 0) {
    throw Error(ErrorCode::kInvalidArgument, "negative raster dimensions");
  }
}

Bytes EncodePng(const Raster& image) {
  if (image.empty()) throw Error(ErrorCode::kInvalidArgument, "empty raster");
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  const auto* buffer = image.pixels().data();
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, buffer, 0, nullptr)) {
    throw Error(ErrorCode::kIoFailure, std::string("png sizing: ") + img.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, buffer, 0,
                                 nullptr)) {
    throw Error(ErrorCode::kIoFailure, std::string("png encode: ") + img.message);
  }
  out.resize(size);
  return out;
}

Raster DecodePng(std::span<const std::uint8_t> png) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, png.data(), png.size())) {
    throw Error(ErrorCode::kDecodeFailure, std::string("png: ") + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  if (img.width == 0 || img.height == 0) {
    png_image_free(&img);
    throw Error(ErrorCode::kDecodeFailure, "png has no pixels");
  }
  Raster out(static_cast<int>(img.width), static_cast<int>(img.height));
  if (!png_image_finish_read(&img, nullptr, out.pixels().data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error(ErrorCode::kDecodeFailure, std::string("png: ") + img.message);
  }
  return out;
}

Raster Crop(const Raster& image, const Box& box) {
  if (!box.Within(image.width(), image.height())) {
    throw Error(ErrorCode::kInvalidArgument, "crop box outside image");
  }
  Raster out(box.w, box.h);
  for (int y = 0; y < box.h; ++y) {
    std::memcpy(out.at(0, y), image.at(box.x, box.y + y),
                static_cast<std::size_t>(box.w) * 3);
  }
  return out;
}

Raster ResizeBilinear(const Raster& image, int width, int height) {
  if (width <= 0 || height <= 0 || image.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "resize to empty raster");
  }
  if (width == image.width() && height == image.height()) return image;
  Raster out(width, height);
  const double sx = static_cast<double>(image.width()) / width;
  const double sy = static_cast<double>(image.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(image.height() - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(image.width() - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width() - 1);
      const double tx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = image.at(x0, y0)[c] * (1 - tx) + image.at(x1, y0)[c] * tx;
        const double bot = image.at(x0, y1)[c] * (1 - tx) + image.at(x1, y1)[c] * tx;
        out.at(x, y)[c] =
            static_cast<std::uint8_t>(std::lround(top * (1 - ty) + bot * ty));
      }
    }
  }
  return out;
}

GrayImage ToGray(const Raster& image) {
  GrayImage out{image.width(), image.height(), {}};
  out.pixels.resize(static_cast<std::size_t>(image.width()) * image.height());
  std::size_t i = 0;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const std::uint8_t* p = image.at(x, y);
      // ITU-R BT.601 luma in fixed point, as used by common codecs.
      out.pixels[i++] = static_cast<std::uint8_t>(
          (p[0] * 4899 + p[1] * 9617 + p[2] * 1868 + 8192) >> 14);
    }
  }
  return out;
}

Raster ConcatHorizontal(const Raster& left, const Raster& right,
                        double* right_scale) {
  Raster scaled = right;
  double scale = 1.0;
  if (right.height() != left.height()) {
    scale = static_cast<double>(left.height()) / right.height();
    const int w = std::max(1, static_cast<int>(std::lround(right.width() * scale)));
    scaled = ResizeBilinear(right, w, left.height());
  }
  if (right_scale != nullptr) *right_scale = scale;
  Raster out(left.width() + scaled.width(), left.height());
  for (int y = 0; y < left.height(); ++y) {
    std::memcpy(out.at(0, y), left.at(0, y),
                static_cast<std::size_t>(left.width()) * 3);
    std::memcpy(out.at(left.width(), y), scaled.at(0, y),
                static_cast<std::size_t>(scaled.width()) * 3);
  }
  return out;
}

Box Mask::Bounds() const {
  int x0 = width, y0 = height, x1 = -1, y1 = -1;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!at(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return Box{};
  return Box{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

std::size_t Mask::Count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
}

Mask BoxMask(int width, int height, const Box& box) {
  Mask m{width, height, std::vector<std::uint8_t>(
                            static_cast<std::size_t>(width) * height, 0)};
  for (int y = std::max(0, box.y); y < std::min(height, box.y + box.h); ++y) {
    for (int x = std::max(0, box.x); x < std::min(width, box.x + box.w); ++x) {
      m.bits[static_cast<std::size_t>(y) * width + x] = 1;
    }
  }
  return m;
}

std::string EncodeMaskRle(const Mask& mask) {
  std::string out = std::to_string(mask.height) + "x" + std::to_string(mask.width) + ":";
  std::uint8_t current = 0;
  std::size_t run = 0;
  bool first = true;
  auto flush = [&] {
    if (!first) out += ' ';
    out += std::to_string(run);
    first = false;
  };
  for (std::uint8_t b : mask.bits) {
    const std::uint8_t v = b ? 1 : 0;
    if (v != current) {
      flush();
      current = v;
      run = 0;
    }
    ++run;
  }
  flush();
  return out;
}

namespace {

bool ParseInt(std::string_view s, long long& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

Mask DecodeMaskRle(const std::string& rle) {
  const auto colon = rle.find(':');
  const auto cross = rle.find('x');
  long long h = 0, w = 0;
  if (colon == std::string::npos || cross == std::string::npos || cross > colon ||
      !ParseInt(std::string_view(rle).substr(0, cross), h) ||
      !ParseInt(std::string_view(rle).substr(cross + 1, colon - cross - 1), w) ||
      h <= 0 || w <= 0 || h * w > (1LL << 28)) {
    throw Error(ErrorCode::kDecodeFailure, "bad mask_rle header");
  }
  Mask m{static_cast<int>(w), static_cast<int>(h), {}};
  m.bits.reserve(static_cast<std::size_t>(h * w));
  std::uint8_t value = 0;
  std::string_view rest = std::string_view(rle).substr(colon + 1);
  while (!rest.empty()) {
    const auto sp = rest.find(' ');
    const std::string_view tok = rest.substr(0, sp);
    long long run = 0;
    if (!ParseInt(tok, run) || run < 0 ||
        static_cast<long long>(m.bits.size()) + run > h * w) {
      throw Error(ErrorCode::kDecodeFailure, "bad mask_rle run");
    }
    m.bits.insert(m.bits.end(), static_cast<std::size_t>(run), value);
    value ^= 1;
    if (sp == std::string_view::npos) break;
    rest.remove_prefix(sp + 1);
  }
  if (static_cast<long long>(m.bits.size()) != h * w) {
    throw Error(ErrorCode::kDecodeFailure, "mask_rle runs do not cover the grid");
  }
  return m;
}

}  // namespace forge
