// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "forge/asset.hpp"
#include "forge/interleave.hpp"

namespace forge {

enum class Provenance { kImagePipeline, kVideoPipeline, kBenchmark };

std::string_view ProvenanceName(Provenance provenance);
Provenance ParseProvenance(std::string_view name);

// One training record. assets[k - 1] fills slot k.
struct InterleavedSample {
  std::string sample_id;
  Provenance provenance = Provenance::kImagePipeline;
  InterleavedInstruction instruction;
  std::vector<VisualAsset> assets;
  PhraseMapping mapping;
  std::optional<Bytes> target_image;
  std::string engine_config_digest;

  friend bool operator==(const InterleavedSample&,
                         const InterleavedSample&) = default;
};

inline constexpr std::size_t kImageSampleMinAssets = 3;
inline constexpr std::size_t kImageSampleMaxAssets = 8;

// Empty when the sample satisfies every record invariant; otherwise one
// reason per broken invariant. When `decode_assets` is set, every asset
// must decode and bboxes are checked against the decoded parent when known.
std::vector<std::string> CheckSample(const InterleavedSample& sample,
                                     bool decode_assets = false);

}  // namespace forge
