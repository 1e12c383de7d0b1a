// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Offline fixture sets: synthetic inputs plus the mock transcript recorded
// while the default-configured pipeline ran over them against synth::World.
// Replaying a transcript requires the same seed and configuration.
//
//   image/  corpus/scene_NNN.png, transcript.json, fixture.json
//   video/  videos/<clip>/frames.json + frames, transcript.json, fixture.json
//   bench/  pool/entities.json + images, generated/<case_id>.png,
//           transcript.json, fixture.json

#pragma once

#include <cstdint>
#include <filesystem>

namespace forge::fixtures {

inline constexpr std::uint64_t kDefaultSeed = 7;

struct ImageFixtureOptions {
  int scenes = 50;
  std::uint64_t seed = kDefaultSeed;
};

struct VideoFixtureOptions {
  std::uint64_t seed = kDefaultSeed;
};

struct BenchFixtureOptions {
  int entities = 24;
  int cases = 12;
  std::uint64_t seed = kDefaultSeed;
};

void WriteImageFixture(const std::filesystem::path& dir, const ImageFixtureOptions& options = {});
void WriteVideoFixture(const std::filesystem::path& dir, const VideoFixtureOptions& options = {});
void WriteBenchFixture(const std::filesystem::path& dir, const BenchFixtureOptions& options = {});

}  // namespace forge::fixtures
