// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "forge/raster.hpp"
#include "forge/rng.hpp"
#include "forge/sample.hpp"

namespace forge::testing {

inline Bytes TinyPng(std::uint64_t seed, int w = 6, int h = 5) {
  Rng rng(seed);
  Raster r(w, h);
  for (auto& p : r.pixels()) p = static_cast<std::uint8_t>(rng.Below(256));
  return EncodePng(r);
}

// A valid sample with `slots` assets. Assets draw from a small pool of
// images so blob deduplication is exercised.
inline InterleavedSample MakeSample(Rng& rng, int id, int slots,
                                    Provenance provenance = Provenance::kImagePipeline) {
  static const char* kNouns[] = {"cat", "red kite", "lamp", "old tree", "violin",
                                 "mug", "bicycle", "glass jar", "dog"};
  std::vector<Segment> segs;
  InterleavedSample s;
  s.sample_id = "s" + std::to_string(id);
  s.provenance = provenance;
  segs.push_back(TextSpan{"Scene " + std::to_string(id) + " with a"});
  for (int k = 1; k <= slots; ++k) {
    const std::string noun = kNouns[rng.Below(9)];
    segs.push_back(VisualSlot{k});
    segs.push_back(TextSpan{" " + noun + (k < slots ? " beside a" : " at dusk.")});
    s.mapping.entries.push_back({noun, k});
    VisualAsset a;
    a.image_bytes = TinyPng(rng.Below(20), 6, 5);
    a.source = provenance == Provenance::kVideoPipeline ? AssetSource::kSourceFrameCrop
                                                        : AssetSource::kBboxCrop;
    a.origin_ref = "img-" + std::to_string(id);
    if (rng.Below(2) == 0) a.bbox = Box{static_cast<int>(rng.Below(50)), 3, 6, 5};
    s.assets.push_back(std::move(a));
  }
  s.instruction = InterleavedInstruction::FromSegments(segs);
  if (rng.Below(3) != 0) s.target_image = TinyPng(1000 + id, 8, 8);
  s.engine_config_digest = "cfg" + std::to_string(id % 3);
  return s;
}

}  // namespace forge::testing
