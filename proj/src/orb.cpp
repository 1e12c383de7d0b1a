// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/orb.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>

#include "forge/error.hpp"
#include "forge/rng.hpp"

namespace forge::orb {
namespace {

constexpr int kHalfPatch = kPatchSize / 2;
constexpr int kHarrisBlock = 7;
constexpr float kHarrisK = 0.04f;
constexpr std::uint64_t kPatternSeed = 0x0b5e55edULL;

// Bresenham circle of radius 3, clockwise from twelve o'clock.
constexpr int kCircle[16][2] = {{0, -3}, {1, -3},  {2, -2},  {3, -1}, {3, 0},  {3, 1},
                                {2, 2},  {1, 3},   {0, 3},   {-1, 3}, {-2, 2}, {-3, 1},
                                {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}};

int Reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

int PixelReflect(const GrayImage& img, int x, int y) {
  return img.at(Reflect101(x, img.width), Reflect101(y, img.height));
}

// Largest threshold at which the pixel would still be a corner, or 0 when it
// is not one at `threshold`.
int FastScore(const GrayImage& img, int x, int y, int threshold) {
  const int p = img.at(x, y);
  int d[16];
  for (int k = 0; k < 16; ++k) d[k] = img.at(x + kCircle[k][0], y + kCircle[k][1]) - p;
  int best = 0;
  for (int start = 0; start < 16; ++start) {
    int bright = std::numeric_limits<int>::max();
    int dark = std::numeric_limits<int>::max();
    for (int k = 0; k < 9; ++k) {
      const int v = d[(start + k) % 16];
      bright = std::min(bright, v);
      dark = std::min(dark, -v);
    }
    best = std::max({best, bright, dark});
  }
  return best > threshold ? best : 0;
}

float HarrisResponse(const GrayImage& img, int x0, int y0) {
  const int r = kHarrisBlock / 2;
  long long a = 0, b = 0, c = 0;
  for (int y = y0 - r; y <= y0 + r; ++y) {
    for (int x = x0 - r; x <= x0 + r; ++x) {
      auto px = [&](int dx, int dy) { return PixelReflect(img, x + dx, y + dy); };
      const int ix = (px(1, 0) - px(-1, 0)) * 2 + (px(1, -1) - px(-1, -1)) +
                     (px(1, 1) - px(-1, 1));
      const int iy = (px(0, 1) - px(0, -1)) * 2 + (px(-1, 1) - px(-1, -1)) +
                     (px(1, 1) - px(1, -1));
      a += ix * ix;
      b += iy * iy;
      c += ix * iy;
    }
  }
  const float scale = 1.0f / (4.0f * kHarrisBlock * 255.0f);
  const float s4 = scale * scale * scale * scale;
  const float fa = static_cast<float>(a), fb = static_cast<float>(b),
              fc = static_cast<float>(c);
  return (fa * fb - fc * fc - kHarrisK * (fa + fb) * (fa + fb)) * s4;
}

// Half-widths of the circular orientation patch per row offset.
const std::array<int, kHalfPatch + 2>& CircleRows() {
  static const auto rows = [] {
    std::array<int, kHalfPatch + 2> umax{};
    const int vmax = static_cast<int>(std::floor(kHalfPatch * std::sqrt(2.0) / 2 + 1));
    const int vmin = static_cast<int>(std::ceil(kHalfPatch * std::sqrt(2.0) / 2));
    for (int v = 0; v <= vmax; ++v) {
      umax[v] = static_cast<int>(std::lround(std::sqrt(double(kHalfPatch * kHalfPatch - v * v))));
    }
    // Symmetrize so the patch is identical under transposition.
    for (int v = kHalfPatch, v0 = 0; v >= vmin; --v) {
      while (umax[v0] == umax[v0 + 1]) ++v0;
      umax[v] = v0;
      ++v0;
    }
    return umax;
  }();
  return rows;
}

float IntensityCentroidAngle(const GrayImage& img, int cx, int cy) {
  const auto& umax = CircleRows();
  long long m01 = 0, m10 = 0;
  for (int u = -kHalfPatch; u <= kHalfPatch; ++u) m10 += u * PixelReflect(img, cx + u, cy);
  for (int v = 1; v <= kHalfPatch; ++v) {
    long long v_sum = 0;
    const int d = umax[v];
    for (int u = -d; u <= d; ++u) {
      const int plus = PixelReflect(img, cx + u, cy + v);
      const int minus = PixelReflect(img, cx + u, cy - v);
      v_sum += plus - minus;
      m10 += u * (plus + minus);
    }
    m01 += v * v_sum;
  }
  double deg = std::atan2(static_cast<double>(m01), static_cast<double>(m10)) * 180.0 /
               std::numbers::pi;
  if (deg < 0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return static_cast<float>(deg);
}

GrayImage GaussianBlur7(const GrayImage& img) {
  constexpr double kSigma = 2.0;
  double kernel[7];
  double sum = 0;
  for (int i = 0; i < 7; ++i) {
    kernel[i] = std::exp(-(i - 3) * (i - 3) / (2 * kSigma * kSigma));
    sum += kernel[i];
  }
  for (double& k : kernel) k /= sum;

  std::vector<double> tmp(img.pixels.size());
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0;
      for (int k = -3; k <= 3; ++k) acc += kernel[k + 3] * PixelReflect(img, x + k, y);
      tmp[static_cast<std::size_t>(y) * img.width + x] = acc;
    }
  }
  GrayImage out{img.width, img.height, std::vector<std::uint8_t>(img.pixels.size())};
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0;
      for (int k = -3; k <= 3; ++k) {
        acc += kernel[k + 3] * tmp[static_cast<std::size_t>(Reflect101(y + k, img.height)) *
                                       img.width + x];
      }
      out.pixels[static_cast<std::size_t>(y) * img.width + x] =
          static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
    }
  }
  return out;
}

Descriptor Describe(const GrayImage& blurred, const Keypoint& kp) {
  const double angle = kp.angle * std::numbers::pi / 180.0;
  const double a = std::cos(angle), b = std::sin(angle);
  const int cx = static_cast<int>(std::lround(kp.x));
  const int cy = static_cast<int>(std::lround(kp.y));
  auto sample = [&](int px, int py) {
    const int rx = static_cast<int>(std::lround(px * a - py * b));
    const int ry = static_cast<int>(std::lround(px * b + py * a));
    return PixelReflect(blurred, cx + rx, cy + ry);
  };
  Descriptor d{};
  const auto& pattern = SamplingPattern();
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    const auto& p = pattern[i];
    if (sample(p[0], p[1]) < sample(p[2], p[3])) d[i / 64] |= std::uint64_t{1} << (i % 64);
  }
  return d;
}

// Keeps the `n` best by `key`, ties broken by raster order for determinism.
template <typename Key>
void RetainBest(std::vector<Keypoint>& kps, std::size_t n, Key key) {
  std::stable_sort(kps.begin(), kps.end(),
                   [&](const Keypoint& l, const Keypoint& r) { return key(l) > key(r); });
  if (kps.size() > n) kps.resize(n);
}

}  // namespace

void OrbConfig::Validate() const {
  if (max_keypoints < 1) throw Error(ErrorCode::kInvalidArgument, "max_keypoints must be >= 1");
  if (fast_threshold < 1 || fast_threshold > 254) {
    throw Error(ErrorCode::kInvalidArgument, "fast_threshold must be in [1, 254]");
  }
  if (descriptor_bits != 256) {
    throw Error(ErrorCode::kInvalidArgument, "descriptor_bits must be 256");
  }
  if (!(match_ratio > 0.0 && match_ratio <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "match_ratio must be in (0, 1]");
  }
  if (!(static_similarity_threshold >= 0.0 && static_similarity_threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "static_similarity_threshold must be in [0, 1]");
  }
}

const std::vector<std::array<int, 4>>& SamplingPattern() {
  static const auto pattern = [] {
    // Isotropic Gaussian around the patch center, sigma = patch / 5, clipped.
    Rng rng(kPatternSeed);
    const double sigma = kPatchSize / 5.0;
    auto coord = [&] {
      const double u1 = 1.0 - rng.Uniform01();
      const double u2 = rng.Uniform01();
      const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
      return static_cast<int>(std::clamp(std::lround(z * sigma), -long{kHalfPatch},
                                         long{kHalfPatch}));
    };
    std::vector<std::array<int, 4>> out;
    while (out.size() < 256) {
      std::array<int, 4> p{coord(), coord(), coord(), coord()};
      if (p[0] == p[2] && p[1] == p[3]) continue;
      out.push_back(p);
    }
    return out;
  }();
  return pattern;
}

int Hamming(const Descriptor& a, const Descriptor& b) {
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::popcount(a[i] ^ b[i]);
  return d;
}

std::vector<Keypoint> DetectFast(const GrayImage& img, int threshold) {
  std::vector<Keypoint> out;
  if (img.width < 7 || img.height < 7) return out;
  const int w = img.width, h = img.height;
  std::vector<int> score(static_cast<std::size_t>(w) * h, 0);
  for (int y = 3; y < h - 3; ++y) {
    for (int x = 3; x < w - 3; ++x) score[static_cast<std::size_t>(y) * w + x] = FastScore(img, x, y, threshold);
  }
  for (int y = 4; y < h - 4; ++y) {
    for (int x = 4; x < w - 4; ++x) {
      const int s = score[static_cast<std::size_t>(y) * w + x];
      if (s == 0) continue;
      bool peak = true;
      for (int dy = -1; dy <= 1 && peak; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx != 0 || dy != 0) &&
              score[static_cast<std::size_t>(y + dy) * w + x + dx] >= s) {
            peak = false;
            break;
          }
        }
      }
      if (peak) {
        Keypoint kp;
        kp.x = static_cast<float>(x);
        kp.y = static_cast<float>(y);
        kp.fast_score = s;
        out.push_back(kp);
      }
    }
  }
  return out;
}

Features DetectAndDescribe(const GrayImage& img, const OrbConfig& config) {
  config.Validate();
  Features f;
  std::vector<Keypoint> kps = DetectFast(img, config.fast_threshold);
  std::erase_if(kps, [&](const Keypoint& k) {
    return k.x < kEdgeThreshold || k.y < kEdgeThreshold || k.x >= img.width - kEdgeThreshold ||
           k.y >= img.height - kEdgeThreshold;
  });
  const auto n = static_cast<std::size_t>(config.max_keypoints);
  RetainBest(kps, 2 * n, [](const Keypoint& k) { return k.fast_score; });
  for (Keypoint& k : kps) {
    k.response = HarrisResponse(img, static_cast<int>(k.x), static_cast<int>(k.y));
  }
  RetainBest(kps, n, [](const Keypoint& k) { return k.response; });
  for (Keypoint& k : kps) {
    k.angle = IntensityCentroidAngle(img, static_cast<int>(k.x), static_cast<int>(k.y));
  }
  if (kps.empty()) return f;
  const GrayImage blurred = GaussianBlur7(img);
  f.descriptors.reserve(kps.size());
  for (const Keypoint& k : kps) f.descriptors.push_back(Describe(blurred, k));
  f.keypoints = std::move(kps);
  return f;
}

int CountGoodMatches(const Features& a, const Features& b, double ratio) {
  if (b.descriptors.size() < 2) return 0;
  int good = 0;
  for (const Descriptor& da : a.descriptors) {
    int best = std::numeric_limits<int>::max(), second = best;
    for (const Descriptor& db : b.descriptors) {
      const int d = Hamming(da, db);
      if (d < best) {
        second = best;
        best = d;
      } else if (d < second) {
        second = d;
      }
    }
    if (best < ratio * second) ++good;
  }
  return good;
}

Similarity OrbSimilarity(const Raster& a, const Raster& b, const OrbConfig& config) {
  config.Validate();
  Similarity s;
  if (std::min({a.width(), a.height(), b.width(), b.height()}) < kMinPatchSide) {
    s.low_texture = true;
    return s;
  }
  const Features fa = DetectAndDescribe(ToGray(a), config);
  const Features fb = DetectAndDescribe(ToGray(b), config);
  s.keypoints_a = static_cast<int>(fa.keypoints.size());
  s.keypoints_b = static_cast<int>(fb.keypoints.size());
  if (s.keypoints_a == 0 || s.keypoints_b == 0) {
    s.low_texture = true;
    return s;
  }
  const int good = CountGoodMatches(fa, fb, config.match_ratio);
  s.score = std::min(1.0, static_cast<double>(good) / std::min(s.keypoints_a, s.keypoints_b));
  return s;
}

Similarity OrbSimilarity(std::span<const std::uint8_t> png_a, std::span<const std::uint8_t> png_b,
                         const OrbConfig& config) {
  return OrbSimilarity(DecodePng(png_a), DecodePng(png_b), config);
}

}  // namespace forge::orb
