// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace forge::synth {
namespace {

void Plot(Raster& image, int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= image.width() || y >= image.height()) return;
  image.Set(x, y, c[0], c[1], c[2]);
}

int Coord(Rng& rng, int lo, int span) {
  return lo + static_cast<int>(rng.Below(static_cast<std::uint64_t>(std::max(span, 1))));
}

}  // namespace

Rgb RandomColor(Rng& rng) {
  return {static_cast<std::uint8_t>(rng.Below(256)), static_cast<std::uint8_t>(rng.Below(256)),
          static_cast<std::uint8_t>(rng.Below(256))};
}

void FillBox(Raster& image, const Box& box, Rgb color) {
  for (int y = box.y; y < box.y + box.h; ++y) {
    for (int x = box.x; x < box.x + box.w; ++x) Plot(image, x, y, color);
  }
}

void PaintTexture(Raster& image, const Box& region, Rng& rng, int shapes) {
  const int max_side = std::max(4, std::min(region.w, region.h) / 3);
  for (int s = 0; s < shapes; ++s) {
    const Rgb color = RandomColor(rng);
    const int kind = static_cast<int>(rng.Below(3));
    const int cx = Coord(rng, region.x, region.w);
    const int cy = Coord(rng, region.y, region.h);
    const int rw = 2 + static_cast<int>(rng.Below(static_cast<std::uint64_t>(max_side)));
    const int rh = 2 + static_cast<int>(rng.Below(static_cast<std::uint64_t>(max_side)));
    auto inside = [&](int x, int y) {
      return x >= region.x && y >= region.y && x < region.x + region.w && y < region.y + region.h;
    };
    if (kind == 0) {
      for (int y = cy - rh / 2; y < cy + (rh + 1) / 2; ++y) {
        for (int x = cx - rw / 2; x < cx + (rw + 1) / 2; ++x) {
          if (inside(x, y)) Plot(image, x, y, color);
        }
      }
    } else if (kind == 1) {
      const double ax = rw / 2.0, ay = rh / 2.0;
      for (int y = cy - rh / 2 - 1; y <= cy + rh / 2 + 1; ++y) {
        for (int x = cx - rw / 2 - 1; x <= cx + rw / 2 + 1; ++x) {
          const double dx = (x - cx) / ax, dy = (y - cy) / ay;
          if (dx * dx + dy * dy <= 1.0 && inside(x, y)) Plot(image, x, y, color);
        }
      }
    } else {
      const int ex = Coord(rng, region.x, region.w);
      const int ey = Coord(rng, region.y, region.h);
      const int steps = std::max(std::abs(ex - cx), std::abs(ey - cy)) + 1;
      for (int i = 0; i <= steps; ++i) {
        const int x = cx + (ex - cx) * i / steps;
        const int y = cy + (ey - cy) * i / steps;
        for (int d = 0; d < 2; ++d) {
          if (inside(x + d, y)) Plot(image, x + d, y, color);
          if (inside(x, y + d)) Plot(image, x, y + d, color);
        }
      }
    }
  }
}

Raster TexturedPatch(int width, int height, std::uint64_t seed, int shapes) {
  Rng rng(seed);
  const Rgb bg = RandomColor(rng);
  Raster r(width, height);
  FillBox(r, {0, 0, width, height}, bg);
  PaintTexture(r, {0, 0, width, height}, rng, shapes);
  return r;
}

Raster NoisePatch(int width, int height, std::uint64_t seed) {
  Rng rng(seed);
  Raster r(width, height);
  for (auto& p : r.pixels()) p = static_cast<std::uint8_t>(rng.Below(256));
  return r;
}

Raster Rotate(const Raster& image, double degrees, Rgb fill) {
  const double rad = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double cx = (image.width() - 1) / 2.0, cy = (image.height() - 1) / 2.0;
  Raster out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      // Inverse map: screen y points down, so a counter-clockwise turn on
      // screen is a clockwise turn in these coordinates.
      const double dx = x - cx, dy = y - cy;
      const double sx = c * dx - s * dy + cx;
      const double sy = s * dx + c * dy + cy;
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      if (x0 < 0 || y0 < 0 || x0 + 1 >= image.width() || y0 + 1 >= image.height()) {
        out.Set(x, y, fill[0], fill[1], fill[2]);
        continue;
      }
      const double fx = sx - x0, fy = sy - y0;
      std::uint8_t* o = out.at(x, y);
      for (int ch = 0; ch < 3; ++ch) {
        const double top = image.at(x0, y0)[ch] * (1 - fx) + image.at(x0 + 1, y0)[ch] * fx;
        const double bot = image.at(x0, y0 + 1)[ch] * (1 - fx) + image.at(x0 + 1, y0 + 1)[ch] * fx;
        o[ch] = static_cast<std::uint8_t>(std::clamp(std::lround(top * (1 - fy) + bot * fy), 0L, 255L));
      }
    }
  }
  return out;
}

Raster Brighten(const Raster& image, int delta) {
  Raster out = image;
  for (auto& p : out.pixels()) p = static_cast<std::uint8_t>(std::clamp(p + delta, 0, 255));
  return out;
}

}  // namespace forge::synth
