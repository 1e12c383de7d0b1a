// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace forge {

// Seeded generator whose derived draws are identical across standard
// libraries. std::mt19937_64 output is fixed by the standard; the
// distributions in <random> are not, so bounded draws are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double Uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t Below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  // Uniform integer in [lo, hi].
  std::int64_t Between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    Below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  // Fisher-Yates, front-to-back.
  template <typename T>
  void Shuffle(std::vector<T>& items) {
    for (std::size_t i = 0; i + 1 < items.size(); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(Below(items.size() - i));
      std::swap(items[i], items[j]);
    }
  }

  // k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> SampleIndices(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

// Stable 64-bit seed derived from a parent seed and a label (FNV-1a mix).
std::uint64_t DeriveSeed(std::uint64_t parent, std::string_view label);

}  // namespace forge
