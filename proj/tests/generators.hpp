// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "forge/interleave.hpp"
#include "forge/rng.hpp"

namespace forge::testing {

// Random instruction with slots in a random textual order. Spans are drawn
// from fragments that stress the marker grammar without forming one.
inline InterleavedInstruction RandomInstruction(Rng& rng) {
  static const std::vector<std::string> kFragments = {
      "a",  " ",   "robot", "[",   "]",  "Image", "[Image", "1", "0", "[Image0]",
      "é",  "中", "[Image 2]", "[Image01]", "\n", "  ", "[Imag", "x]", "\t"};
  const int k = static_cast<int>(rng.Below(7));
  std::vector<int> order(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = i + 1;
  rng.Shuffle(order);
  auto span = [&](bool must_be_nonempty) {
    for (;;) {
      std::string s;
      const auto n = rng.Below(5) + (must_be_nonempty ? 1 : 0);
      for (std::uint64_t i = 0; i < n; ++i) s += kFragments[rng.Below(kFragments.size())];
      if (ParseTemplate(s).slot_count() == 0) return s;
    }
  };
  std::vector<Segment> segs;
  segs.push_back(TextSpan{span(false)});
  for (int i = 0; i < k; ++i) {
    segs.push_back(VisualSlot{order[static_cast<std::size_t>(i)]});
    segs.push_back(TextSpan{span(i + 1 < k)});
  }
  return InterleavedInstruction::FromSegments(std::move(segs));
}

}  // namespace forge::testing
