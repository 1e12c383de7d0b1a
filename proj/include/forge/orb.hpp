// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Single-scale ORB: FAST-9 corners ranked by Harris response, intensity
// centroid orientation, and 256-bit steered binary descriptors compared on a
// Gaussian-smoothed image. Matching is brute-force Hamming with a ratio test.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "forge/raster.hpp"

namespace forge::orb {

struct OrbConfig {
  int max_keypoints = 500;
  int fast_threshold = 20;
  int descriptor_bits = 256;  // fixed
  double match_ratio = 0.75;
  double static_similarity_threshold = 0.6;

  // Throws Error(kInvalidArgument).
  void Validate() const;
};

// Side length below which a patch is treated as low texture.
inline constexpr int kMinPatchSide = 32;
// Keypoints closer than this to the border are discarded.
inline constexpr int kEdgeThreshold = 16;
inline constexpr int kPatchSize = 31;

struct Keypoint {
  float x = 0;
  float y = 0;
  float angle = 0;     // degrees in [0, 360)
  float response = 0;  // Harris
  int fast_score = 0;
};

using Descriptor = std::array<std::uint64_t, 4>;

struct Features {
  std::vector<Keypoint> keypoints;
  std::vector<Descriptor> descriptors;
};

int Hamming(const Descriptor& a, const Descriptor& b);

// FAST-9 with 3x3 non-maximum suppression; no border filtering.
std::vector<Keypoint> DetectFast(const GrayImage& image, int threshold);

Features DetectAndDescribe(const GrayImage& image, const OrbConfig& config);

// Matches from `a` into `b` that pass the ratio test.
int CountGoodMatches(const Features& a, const Features& b, double ratio);

struct Similarity {
  double score = 0;  // good matches / min(keypoints), in [0, 1]
  int keypoints_a = 0;
  int keypoints_b = 0;
  bool low_texture = false;
};

Similarity OrbSimilarity(const Raster& a, const Raster& b, const OrbConfig& config);
// Decodes PNG patches first; throws Error(kDecodeFailure).
Similarity OrbSimilarity(std::span<const std::uint8_t> png_a,
                         std::span<const std::uint8_t> png_b, const OrbConfig& config);

// The 256 sampling pairs (x1, y1, x2, y2) inside the 31x31 patch.
const std::vector<std::array<int, 4>>& SamplingPattern();

}  // namespace forge::orb
