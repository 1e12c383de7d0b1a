// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

// A procedural stand-in for the model services. Scenes, video clips and
// benchmark entities are rendered with known ground truth, and World answers
// every client role from that ground truth. Wrapped in a RecordingTransport
// it produces the mock transcripts the pipelines replay offline.

#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "forge/clients.hpp"
#include "forge/raster.hpp"
#include "forge/rng.hpp"

namespace forge::synth {

struct SceneObject {
  std::string label;    // noun, used as the mapped phrase
  std::string color;    // color name
  std::string caption;  // region description
  Box bbox;             // tight bounds of mask
  Mask mask;            // image-sized
};

struct Scene {
  std::string caption;
  std::vector<SceneObject> objects;
  Raster image;
  Bytes png;
};

struct SceneOptions {
  int width = 160;
  int height = 120;
  int objects = 4;
  int min_side = 14;
  int max_side = 40;
  // Detector extras.
  bool add_tiny_box = true;
  bool add_huge_box = false;
  bool add_duplicate_box = true;
  // The segmenter answers this object (0-based) with a mask of the wrong size.
  int broken_segment = -1;
};

Scene MakeScene(std::uint64_t seed, const SceneOptions& options);

struct ClipFrame {
  double time = 0;
  Raster image;
  Bytes png;
  std::vector<SceneObject> objects;  // same order and labels in every frame
  std::string caption;
};

struct Clip {
  std::string name;
  std::vector<ClipFrame> frames;
};

// kFlat objects are untextured and stay put, so ORB finds nothing to match.
enum class ObjectMotion { kStatic, kDynamic, kFlat };

struct ClipOptions {
  int width = 256;
  int height = 192;
  std::vector<double> times = {0.0, 1.5, 3.0, 4.5, 7.0, 12.0};
  std::vector<ObjectMotion> motions = {ObjectMotion::kStatic, ObjectMotion::kDynamic,
                                       ObjectMotion::kDynamic};
  // Every frame is a byte-identical copy of the first.
  bool frozen = false;
};

Clip MakeClip(std::uint64_t seed, const std::string& name, const ClipOptions& options);

struct BenchEntityArt {
  std::string label;
  std::string description;
  Raster image;
  Bytes png;
};

BenchEntityArt MakeEntity(std::uint64_t seed, int side = 64);

class World {
 public:
  explicit World(std::uint64_t seed = 0) : seed_(seed) {}

  void AddScene(const Scene& scene, const SceneOptions& options);
  // Registers every frame and every frame pair's side-by-side composite.
  void AddClip(const Clip& clip);
  void AddEntity(const BenchEntityArt& entity);
  // Quality in [0, 1] that judge ratings and QA answers are derived from.
  void AddGenerated(const Bytes& png, double fidelity);
  // The instruction writer answers this caption badly until it gets feedback.
  void MarkSloppyWriter(const std::string& global_caption);

  clients::Json Respond(clients::ClientRole role, const clients::Json& request);
  clients::Responder AsResponder();

 private:
  struct ImageInfo {
    std::string caption;
    std::vector<SceneObject> objects;
    std::vector<clients::Json> extra_detections;
    int width = 0;
    int height = 0;
    int broken_segment = -1;
  };
  struct PairInfo {
    clients::Json matches;
  };

  const ImageInfo& Lookup(const std::string& image_b64, std::string* digest = nullptr) const;
  clients::Json Segment(const clients::Json& request) const;
  clients::Json Describe(const clients::Json& request) const;
  clients::Json Write(const clients::Json& request) const;
  clients::Json Verify(const clients::Json& request) const;
  clients::Json Judge(const clients::Json& request) const;
  clients::Json Answer(const clients::Json& request) const;
  clients::Json Questions(const clients::Json& request) const;

  std::uint64_t seed_;
  mutable std::mutex mu_;
  std::map<std::string, ImageInfo> images_;      // by png digest
  std::map<std::string, PairInfo> composites_;   // by png digest
  std::map<std::string, double> generated_;      // by png digest
  std::set<std::string> sloppy_;
};

}  // namespace forge::synth
