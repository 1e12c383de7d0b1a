// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Video pipeline: pick frame pairs far apart in time, match entities across
// a side-by-side composite with a VLM, keep the entities whose appearance
// really changed, and write an instruction for the target frame whose visual
// tokens are cropped from the source frame.

#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "forge/clients.hpp"
#include "forge/orb.hpp"
#include "forge/raster.hpp"
#include "forge/rng.hpp"
#include "forge/sample.hpp"

namespace forge::store {
class ShardWriter;
}

namespace forge::video {

struct Frame {
  double time = 0;  // seconds
  Raster image;
  Bytes png;
};

struct FramePair {
  Frame source;
  Frame target;  // target.time > source.time
};

// Pre-extracted frames of one video: a directory holding the frame images
// and frames.json, {"frames": [{"file": "000.png", "time": 0.0}, ...]}.
struct FrameSequence {
  std::string name;
  std::vector<Frame> frames;  // strictly increasing time
};

struct VideoEngineConfig {
  double min_gap = 2.0;   // seconds
  double max_gap = 10.0;  // seconds
  int pairs_per_video = 4;
  orb::OrbConfig orb;
  int max_objects = 8;
  int llm_retry_limit = 3;  // total writer attempts
  std::uint64_t rng_seed = 0;

  // Throws Error(kConfigError).
  void Validate() const;
  clients::Json ToJson() const;
  std::string Digest() const;
};

// Pairs (source_time, target_time) with min_gap <= gap <= max_gap, no frame
// used as a source twice, sorted. Throws Error(kNoValidPairs).
std::vector<std::pair<double, double>> SelectFramePairs(const std::vector<double>& times,
                                                        const VideoEngineConfig& config, Rng& rng);

struct EntityMatch {
  std::string label;
  Box bbox_source;
  Box bbox_target;
  friend bool operator==(const EntityMatch&, const EntityMatch&) = default;
};

// Instruction sent to the correspondence VLM with the composite.
extern const char kCorrespondencePrompt[];

// Concatenates source (left) and target (right), asks the VLM for matched
// entities and maps its boxes back to per-frame coordinates. Matches with a
// box crossing the seam or leaving its frame are discarded.
std::vector<EntityMatch> CorrespondEntities(const FramePair& pair, clients::Clients& clients);

enum class FilterVerdict { kKeep, kStatic, kNoSemanticChange };

std::string_view FilterVerdictName(FilterVerdict verdict);

struct FilterDecision {
  FilterVerdict verdict = FilterVerdict::kKeep;
  orb::Similarity similarity;
  bool verifier_called = false;
  std::string reason;
};

// Stage 1: ORB similarity of the two crops; at or above the static threshold
// the match is dropped without consulting the verifier. Stage 2: the change
// verifier decides.
FilterDecision DynamicFilter(const EntityMatch& match, const FramePair& pair,
                             clients::Clients& clients, const orb::OrbConfig& config);

// Throws Error(kSampleRejected) without kept matches, Error(kWeaveFailed)
// when the writer cannot produce a valid instruction.
InterleavedSample BuildVideoSample(const FramePair& pair, const std::vector<EntityMatch>& kept,
                                   clients::Clients& clients, const VideoEngineConfig& config,
                                   const std::string& origin_ref);

// Throws Error(kIoFailure) or Error(kDecodeFailure).
FrameSequence LoadFrameSequence(const std::filesystem::path& dir);
void SaveFrameSequence(const FrameSequence& sequence, const std::filesystem::path& dir);

// A frame directory itself, or its sorted subdirectories holding frames.json.
std::vector<std::filesystem::path> ListVideos(const std::filesystem::path& root);

struct PairOutcome {
  double source_time = 0;
  double target_time = 0;
  std::vector<EntityMatch> matches;
  std::vector<FilterDecision> decisions;  // parallel to matches
  std::optional<InterleavedSample> sample;
  std::string status;  // accepted | rejected | failed
  std::string reason;
};

// Selects pairs for one video and runs every stage on each pair.
// Throws Error(kNoValidPairs).
std::vector<PairOutcome> ProcessVideo(const FrameSequence& sequence, clients::Clients& clients,
                                      const VideoEngineConfig& config);

struct VideoCorpusStats {
  std::size_t videos = 0;
  std::size_t pairs = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t failed = 0;         // pairs
  std::size_t failed_videos = 0;  // could not be loaded or paired
  bool interrupted = false;
};

// Processes videos on a worker pool; samples are written in corpus order and
// every video appends one audit line.
VideoCorpusStats RunVideoCorpus(const std::vector<std::filesystem::path>& videos,
                                clients::Clients& clients, const VideoEngineConfig& config,
                                store::ShardWriter& writer, std::ostream* audit, int workers,
                                const std::atomic<bool>* stop = nullptr);

}  // namespace forge::video
