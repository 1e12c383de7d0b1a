// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "forge/digest.hpp"
#include "forge/raster.hpp"

namespace forge {

struct PhraseEntry {
  std::string phrase;
  int image_index = 0;  // 1-based
  friend bool operator==(const PhraseEntry&, const PhraseEntry&) = default;
};

struct PhraseMapping {
  std::vector<PhraseEntry> entries;

  // Entry for `index`, if any.
  const PhraseEntry* Find(int index) const;
  friend bool operator==(const PhraseMapping&, const PhraseMapping&) = default;
};

enum class AssetSource { kFullImage, kBboxCrop, kMaskedCrop, kSourceFrameCrop };

std::string_view AssetSourceName(AssetSource source);
// Throws Error(kInvalidArgument) on unknown names.
AssetSource ParseAssetSource(std::string_view name);

struct VisualAsset {
  Bytes image_bytes;  // PNG
  AssetSource source = AssetSource::kFullImage;
  std::string origin_ref;
  std::optional<Box> bbox;

  friend bool operator==(const VisualAsset&, const VisualAsset&) = default;
};

}  // namespace forge
