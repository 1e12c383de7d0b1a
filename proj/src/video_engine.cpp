// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/video_engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "forge/dataset_store.hpp"
#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/image_engine.hpp"
#include "forge/worker_pool.hpp"

namespace forge::video {
namespace fs = std::filesystem;
using clients::ClientRole;
using clients::Json;

const char kCorrespondencePrompt[] =
    "The image shows two video frames side by side: the earlier frame on the left, the later "
    "frame on the right. Find every entity that appears in both frames, even if its pose, "
    "lighting or shape changed. For each one return its label, its box in the left frame "
    "(bbox_left) and its box in the right frame (bbox_right), both as [x, y, w, h] in pixel "
    "coordinates of the whole image.";

namespace {

constexpr double kTimeEpsilon = 1e-9;
constexpr const char kFramesManifest[] = "frames.json";

Box BoxFromJson(const Json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw Error(ErrorCode::kSchemaViolation, "box must be [x, y, w, h]");
  }
  return Box{static_cast<int>(std::lround(j[0].get<double>())),
             static_cast<int>(std::lround(j[1].get<double>())),
             static_cast<int>(std::lround(j[2].get<double>())),
             static_cast<int>(std::lround(j[3].get<double>()))};
}

std::string FrameRef(const std::string& name, double time) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "@%.3f", time);
  return name + buf;
}

}  // namespace

void VideoEngineConfig::Validate() const {
  if (!(min_gap > 0 && min_gap <= max_gap)) {
    throw Error(ErrorCode::kConfigError, "need 0 < min_gap <= max_gap");
  }
  if (pairs_per_video < 1) throw Error(ErrorCode::kConfigError, "pairs_per_video must be >= 1");
  if (max_objects < 1) throw Error(ErrorCode::kConfigError, "max_objects must be >= 1");
  if (llm_retry_limit < 1) throw Error(ErrorCode::kConfigError, "llm_retry_limit must be >= 1");
  orb.Validate();
}

Json VideoEngineConfig::ToJson() const {
  return {{"min_gap", min_gap},
          {"max_gap", max_gap},
          {"pairs_per_video", pairs_per_video},
          {"orb",
           {{"max_keypoints", orb.max_keypoints},
            {"fast_threshold", orb.fast_threshold},
            {"descriptor_bits", orb.descriptor_bits},
            {"match_ratio", orb.match_ratio},
            {"static_similarity_threshold", orb.static_similarity_threshold}}},
          {"max_objects", max_objects},
          {"llm_retry_limit", llm_retry_limit},
          {"rng_seed", rng_seed}};
}

std::string VideoEngineConfig::Digest() const { return Sha256Hex(ToJson().dump()); }

std::vector<std::pair<double, double>> SelectFramePairs(const std::vector<double>& times,
                                                        const VideoEngineConfig& config,
                                                        Rng& rng) {
  if (times.size() < 2) throw Error(ErrorCode::kNoValidPairs, "need at least two frames");
  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t i = 0; i < times.size(); ++i) {
    for (std::size_t j = 0; j < times.size(); ++j) {
      const double gap = times[j] - times[i];
      if (gap > 0 && gap >= config.min_gap - kTimeEpsilon && gap <= config.max_gap + kTimeEpsilon) {
        candidates.emplace_back(i, j);
      }
    }
  }
  if (candidates.empty()) {
    throw Error(ErrorCode::kNoValidPairs, "no frame gap within [" + std::to_string(config.min_gap) +
                                              ", " + std::to_string(config.max_gap) + "] s");
  }
  rng.Shuffle(candidates);
  std::set<std::size_t> used_sources;
  std::vector<std::pair<std::size_t, std::size_t>> chosen;
  for (const auto& c : candidates) {
    if (chosen.size() >= static_cast<std::size_t>(config.pairs_per_video)) break;
    if (used_sources.insert(c.first).second) chosen.push_back(c);
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<std::pair<double, double>> out;
  for (const auto& [i, j] : chosen) out.emplace_back(times[i], times[j]);
  return out;
}

std::vector<EntityMatch> CorrespondEntities(const FramePair& pair, clients::Clients& clients) {
  double scale = 1.0;
  const Raster composite = ConcatHorizontal(pair.source.image, pair.target.image, &scale);
  const Json response =
      clients.Request(ClientRole::kCorrespondenceVlm,
                      {{"image_b64", Base64Encode(EncodePng(composite))},
                       {"prompt", kCorrespondencePrompt}});
  const int seam = pair.source.image.width();
  const int tw = pair.target.image.width(), th = pair.target.image.height();
  std::vector<EntityMatch> matches;
  for (const Json& m : response["matches"]) {
    const Box left = BoxFromJson(m["bbox_left"]);
    const Box right = BoxFromJson(m["bbox_right"]);
    if (left.Empty() || right.Empty()) continue;
    if (!left.Within(seam, pair.source.image.height())) continue;
    if (right.x < seam) continue;
    const Box target{static_cast<int>(std::lround((right.x - seam) / scale)),
                     static_cast<int>(std::lround(right.y / scale)),
                     static_cast<int>(std::lround(right.w / scale)),
                     static_cast<int>(std::lround(right.h / scale))};
    if (target.Empty() || !target.Within(tw, th)) continue;
    matches.push_back({m["label"].get<std::string>(), left, target});
  }
  return matches;
}

std::string_view FilterVerdictName(FilterVerdict verdict) {
  switch (verdict) {
    case FilterVerdict::kKeep: return "keep";
    case FilterVerdict::kStatic: return "static";
    case FilterVerdict::kNoSemanticChange: return "no_semantic_change";
  }
  return "unknown";
}

FilterDecision DynamicFilter(const EntityMatch& match, const FramePair& pair,
                             clients::Clients& clients, const orb::OrbConfig& config) {
  const Raster a = Crop(pair.source.image, match.bbox_source);
  const Raster b = Crop(pair.target.image, match.bbox_target);
  FilterDecision d;
  d.similarity = orb::OrbSimilarity(a, b, config);
  char buf[96];
  if (d.similarity.score >= config.static_similarity_threshold) {
    std::snprintf(buf, sizeof(buf), "orb similarity %.3f >= %.3f", d.similarity.score,
                  config.static_similarity_threshold);
    d.verdict = FilterVerdict::kStatic;
    d.reason = buf;
    return d;
  }
  d.verifier_called = true;
  const Json verdict = clients.Request(
      ClientRole::kChangeVerifier,
      {{"image_a_b64", Base64Encode(EncodePng(a))}, {"image_b_b64", Base64Encode(EncodePng(b))}});
  d.reason = verdict["reason"].get<std::string>();
  d.verdict = verdict["changed"].get<bool>() ? FilterVerdict::kKeep
                                             : FilterVerdict::kNoSemanticChange;
  return d;
}

InterleavedSample BuildVideoSample(const FramePair& pair, const std::vector<EntityMatch>& kept,
                                   clients::Clients& clients, const VideoEngineConfig& config,
                                   const std::string& origin_ref) {
  if (kept.empty()) throw Error(ErrorCode::kSampleRejected, "no entity survived filtering");
  std::vector<EntityMatch> objects = kept;
  std::stable_sort(objects.begin(), objects.end(), [](const EntityMatch& a, const EntityMatch& b) {
    if (a.bbox_source.CenterY() != b.bbox_source.CenterY()) {
      return a.bbox_source.CenterY() < b.bbox_source.CenterY();
    }
    return a.bbox_source.CenterX() < b.bbox_source.CenterX();
  });
  if (objects.size() > static_cast<std::size_t>(config.max_objects)) {
    objects.resize(static_cast<std::size_t>(config.max_objects));
  }

  const std::string target_b64 = Base64Encode(pair.target.png);
  const std::string caption =
      clients.Request(ClientRole::kCaptioner, {{"image_b64", target_b64}})["caption"]
          .get<std::string>();
  std::vector<image::WeaveObject> weave;
  for (const EntityMatch& m : objects) {
    const Mask mask =
        BoxMask(pair.target.image.width(), pair.target.image.height(), m.bbox_target);
    const Json desc = clients.Request(ClientRole::kRegionDescriber,
                                      {{"image_b64", target_b64}, {"mask_rle", EncodeMaskRle(mask)}});
    weave.push_back({m.label, desc["caption"].get<std::string>()});
  }
  image::WeaveResult woven =
      image::WeaveInstruction(caption, weave, clients, config.llm_retry_limit);

  InterleavedSample s;
  const std::string digest = Sha256Hex(Sha256Hex(pair.source.png) + ":" +
                                       Sha256Hex(pair.target.png) + ":" + config.Digest());
  s.sample_id = "vid-" + digest.substr(0, 16);
  s.provenance = Provenance::kVideoPipeline;
  s.instruction = std::move(woven.instruction);
  s.mapping = std::move(woven.mapping);
  for (const EntityMatch& m : objects) {
    VisualAsset a;
    a.image_bytes = EncodePng(Crop(pair.source.image, m.bbox_source));
    a.source = AssetSource::kSourceFrameCrop;
    a.origin_ref = origin_ref;
    a.bbox = m.bbox_source;
    s.assets.push_back(std::move(a));
  }
  s.target_image = pair.target.png;
  s.engine_config_digest = config.Digest();
  return s;
}

FrameSequence LoadFrameSequence(const fs::path& dir) {
  const fs::path manifest = dir / kFramesManifest;
  if (!fs::is_regular_file(manifest)) {
    throw Error(ErrorCode::kIoFailure, manifest.string() + " not found");
  }
  Json doc;
  try {
    std::ifstream in(manifest);
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kDecodeFailure, manifest.string() + ": " + e.what());
  }
  FrameSequence seq;
  seq.name = dir.filename().string();
  if (seq.name.empty()) seq.name = dir.parent_path().filename().string();
  for (const Json& f : doc.at("frames")) {
    Frame frame;
    frame.time = f.at("time").get<double>();
    frame.png = ReadFileBytes((dir / f.at("file").get<std::string>()).string());
    frame.image = DecodePng(frame.png);
    if (!seq.frames.empty() && frame.time <= seq.frames.back().time) {
      throw Error(ErrorCode::kDecodeFailure, manifest.string() + ": frame times must increase");
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

void SaveFrameSequence(const FrameSequence& sequence, const fs::path& dir) {
  fs::create_directories(dir);
  Json frames = Json::array();
  for (std::size_t i = 0; i < sequence.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%03zu.png", i);
    WriteFileAtomic((dir / name).string(), sequence.frames[i].png);
    frames.push_back({{"file", name}, {"time", sequence.frames[i].time}});
  }
  WriteFileAtomic((dir / kFramesManifest).string(), Json{{"frames", frames}}.dump(2) + "\n");
}

std::vector<fs::path> ListVideos(const fs::path& root) {
  if (fs::is_regular_file(root / kFramesManifest)) return {root};
  if (!fs::is_directory(root)) throw Error(ErrorCode::kIoFailure, root.string() + " not found");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::is_regular_file(e.path() / kFramesManifest)) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

const Frame& FrameAt(const FrameSequence& seq, double time) {
  for (const Frame& f : seq.frames) {
    if (f.time == time) return f;
  }
  throw Error(ErrorCode::kInvalidArgument, "no frame at the selected time");
}

bool IsRejection(ErrorCode code) {
  return code == ErrorCode::kSampleRejected || code == ErrorCode::kWeaveFailed;
}

}  // namespace

std::vector<PairOutcome> ProcessVideo(const FrameSequence& sequence, clients::Clients& clients,
                                      const VideoEngineConfig& config) {
  config.Validate();
  std::vector<double> times;
  for (const Frame& f : sequence.frames) times.push_back(f.time);
  Rng rng(DeriveSeed(config.rng_seed, sequence.name));
  std::vector<PairOutcome> outcomes;
  for (const auto& [s, t] : SelectFramePairs(times, config, rng)) {
    PairOutcome out;
    out.source_time = s;
    out.target_time = t;
    const FramePair pair{FrameAt(sequence, s), FrameAt(sequence, t)};
    try {
      out.matches = CorrespondEntities(pair, clients);
      std::vector<EntityMatch> kept;
      for (const EntityMatch& m : out.matches) {
        out.decisions.push_back(DynamicFilter(m, pair, clients, config.orb));
        if (out.decisions.back().verdict == FilterVerdict::kKeep) kept.push_back(m);
      }
      out.sample = BuildVideoSample(pair, kept, clients, config, FrameRef(sequence.name, s));
      out.status = "accepted";
    } catch (const Error& e) {
      out.status = IsRejection(e.code()) ? "rejected" : "failed";
      out.reason = e.what();
    }
    outcomes.push_back(std::move(out));
  }
  return outcomes;
}

namespace {

Json BoxJson(const Box& b) { return Json::array({b.x, b.y, b.w, b.h}); }

Json OutcomeJson(const PairOutcome& o) {
  Json matches = Json::array();
  for (std::size_t i = 0; i < o.matches.size(); ++i) {
    Json m = {{"label", o.matches[i].label},
              {"bbox_source", BoxJson(o.matches[i].bbox_source)},
              {"bbox_target", BoxJson(o.matches[i].bbox_target)}};
    if (i < o.decisions.size()) {
      const FilterDecision& d = o.decisions[i];
      m["verdict"] = FilterVerdictName(d.verdict);
      m["orb_score"] = std::round(d.similarity.score * 1e4) / 1e4;
      m["verifier_called"] = d.verifier_called;
      m["reason"] = d.reason;
    }
    matches.push_back(std::move(m));
  }
  Json j = {{"source_time", o.source_time},
            {"target_time", o.target_time},
            {"status", o.status},
            {"matches", matches}};
  if (o.sample) j["sample_id"] = o.sample->sample_id;
  if (!o.reason.empty()) j["reason"] = o.reason;
  return j;
}

struct VideoOutcome {
  std::vector<PairOutcome> pairs;
  Json audit;
  bool failed = false;
};

}  // namespace

VideoCorpusStats RunVideoCorpus(const std::vector<fs::path>& videos, clients::Clients& clients,
                                const VideoEngineConfig& config, store::ShardWriter& writer,
                                std::ostream* audit, int workers, const std::atomic<bool>* stop) {
  config.Validate();
  VideoCorpusStats stats;
  std::function<VideoOutcome(std::size_t)> work = [&](std::size_t i) {
    VideoOutcome out;
    out.audit = {{"video", videos[i].filename().string()}};
    try {
      out.pairs = ProcessVideo(LoadFrameSequence(videos[i]), clients, config);
      Json pairs = Json::array();
      for (const auto& p : out.pairs) pairs.push_back(OutcomeJson(p));
      out.audit["pairs"] = pairs;
    } catch (const Error& e) {
      out.failed = true;
      out.audit["status"] = "failed";
      out.audit["code"] = ErrorCodeName(e.code());
      out.audit["reason"] = e.detail();
    }
    return out;
  };
  std::function<void(std::size_t, VideoOutcome&&)> sink = [&](std::size_t, VideoOutcome&& o) {
    ++stats.videos;
    if (o.failed) ++stats.failed_videos;
    for (auto& p : o.pairs) {
      ++stats.pairs;
      if (p.sample) {
        writer.Write(*p.sample);
        ++stats.accepted;
      } else if (p.status == "rejected") {
        ++stats.rejected;
      } else {
        ++stats.failed;
      }
    }
    if (audit != nullptr) *audit << o.audit.dump() << '\n';
  };
  OrderedParallelMap<VideoOutcome>(videos.size(), workers, work, sink, stop);
  stats.interrupted = stats.videos < videos.size();
  return stats;
}

}  // namespace forge::video
