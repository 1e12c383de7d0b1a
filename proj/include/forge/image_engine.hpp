// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Still-image pipeline: global caption, detection, filtering, per-object
// segmentation and description, then an LLM-written interleaved instruction
// that is validated against the phrase mapping and repaired on failure.

#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "forge/clients.hpp"
#include "forge/raster.hpp"
#include "forge/rng.hpp"
#include "forge/sample.hpp"

namespace forge::store {
class ShardWriter;
}

namespace forge::image {

struct Detection {
  std::string label;
  Box bbox;
  std::optional<double> score;
  friend bool operator==(const Detection&, const Detection&) = default;
};

struct ObjectTriplet {
  std::string label;
  Mask mask;  // same dimensions as the source image
  std::string object_caption;
  VisualAsset crop;
};

struct ImageEngineConfig {
  double min_area_ratio = 0.005;
  double max_area_ratio = 0.80;
  int max_objects = 8;
  int min_objects = 3;
  double iou_dedupe_threshold = 0.9;
  int llm_retry_limit = 3;  // total writer attempts
  std::uint64_t rng_seed = 0;
  bool concurrent_objects = true;

  // Throws Error(kConfigError).
  void Validate() const;
  clients::Json ToJson() const;
  // sha256 of the canonical JSON form; recorded on every sample.
  std::string Digest() const;
};

// A detection or object that did not make it into the sample.
struct DropRecord {
  std::string stage;
  std::string label;
  std::string reason;
};

// Keeps detections whose area ratio lies in [min_area_ratio, max_area_ratio],
// removes near-duplicates (IoU >= threshold, larger box wins), samples down
// to max_objects, and returns the survivors in reading order.
std::vector<Detection> FilterAndSample(const std::vector<Detection>& detections, int width,
                                       int height, const ImageEngineConfig& config, Rng& rng);

struct TripletBatch {
  std::vector<ObjectTriplet> triplets;  // in detection order
  std::vector<DropRecord> drops;
};

// segmenter(bbox) -> mask, region_describer(mask) -> caption, crop = tight
// box around the mask. Per-detection failures become drops.
// Throws Error(kAllDropped) when nothing survives.
TripletBatch BuildObjectTriplets(const Raster& image, const Bytes& png,
                                 const std::vector<Detection>& detections,
                                 clients::Clients& clients, const std::string& origin_ref,
                                 bool concurrent);

struct WeaveObject {
  std::string label;
  std::string caption;
};

struct WeaveResult {
  InterleavedInstruction instruction;
  PhraseMapping mapping;
  int attempts = 0;
};

// Asks the instruction writer to place objects[k - 1] at [Image k]. Each
// rejected answer is re-sent with its problems in "feedback", for at most
// retry_limit attempts in total. Throws Error(kWeaveFailed) carrying the
// last report.
WeaveResult WeaveInstruction(const std::string& global_caption,
                             const std::vector<WeaveObject>& objects,
                             clients::Clients& clients, int retry_limit);

struct ImageSampleResult {
  InterleavedSample sample;
  std::vector<DropRecord> drops;
  int weave_attempts = 0;
};

// Throws Error(kSampleRejected) with "<stage>: <reason>"; service failures
// are rethrown with the stage name prefixed to the message.
ImageSampleResult BuildImageSample(const Bytes& png, const std::string& origin_ref,
                                   clients::Clients& clients, const ImageEngineConfig& config);

// Corpus input: a directory (every *.png, sorted by name) or a text file
// listing one image path per line, relative to the file.
std::vector<std::filesystem::path> ListCorpus(const std::filesystem::path& corpus);

struct CorpusStats {
  std::size_t items = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t failed = 0;
  bool interrupted = false;
};

// Runs the pipeline over the corpus with a worker pool, writes accepted
// samples in corpus order, and appends one audit line per item.
CorpusStats RunImageCorpus(const std::vector<std::filesystem::path>& items,
                           clients::Clients& clients, const ImageEngineConfig& config,
                           store::ShardWriter& writer, std::ostream* audit, int workers,
                           const std::atomic<bool>* stop = nullptr);

}  // namespace forge::image
