// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/image_engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>

#include "forge/dataset_store.hpp"
#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/worker_pool.hpp"

namespace forge::image {
namespace fs = std::filesystem;
using clients::ClientRole;
using clients::Json;

namespace {

Box BoxFromJson(const Json& j) {
  return Box{static_cast<int>(std::lround(j[0].get<double>())),
             static_cast<int>(std::lround(j[1].get<double>())),
             static_cast<int>(std::lround(j[2].get<double>())),
             static_cast<int>(std::lround(j[3].get<double>()))};
}

Json BoxToJson(const Box& b) { return Json::array({b.x, b.y, b.w, b.h}); }

// Runs `fn`, prefixing the stage name to any forge::Error it raises.
template <typename Fn>
auto InStage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), std::string(stage) + ": " + e.detail());
  }
}

bool ReadingOrder(const Detection& a, const Detection& b) {
  if (a.bbox.CenterY() != b.bbox.CenterY()) return a.bbox.CenterY() < b.bbox.CenterY();
  if (a.bbox.CenterX() != b.bbox.CenterX()) return a.bbox.CenterX() < b.bbox.CenterX();
  return a.label < b.label;
}

std::vector<Detection> Filter(const std::vector<Detection>& detections, int width, int height,
                              const ImageEngineConfig& config, Rng& rng,
                              std::vector<DropRecord>* drops) {
  auto drop = [&](const Detection& d, std::string reason) {
    if (drops != nullptr) drops->push_back({"filter", d.label, std::move(reason)});
  };
  const double image_area = static_cast<double>(width) * height;
  std::vector<Detection> sized;
  for (const Detection& d : detections) {
    if (!d.bbox.Within(width, height)) {
      drop(d, "bbox outside the image");
      continue;
    }
    const double ratio = static_cast<double>(d.bbox.Area()) / image_area;
    if (ratio < config.min_area_ratio || ratio > config.max_area_ratio) {
      drop(d, "area ratio " + std::to_string(ratio) + " outside the window");
      continue;
    }
    sized.push_back(d);
  }

  std::stable_sort(sized.begin(), sized.end(), [](const Detection& a, const Detection& b) {
    return a.bbox.Area() > b.bbox.Area();
  });
  std::vector<Detection> kept;
  for (const Detection& d : sized) {
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return IoU(k.bbox, d.bbox) >= config.iou_dedupe_threshold;
    });
    if (duplicate) {
      drop(d, "duplicate of a larger box");
    } else {
      kept.push_back(d);
    }
  }

  const auto max_objects = static_cast<std::size_t>(config.max_objects);
  if (kept.size() > max_objects) {
    std::vector<bool> chosen(kept.size(), false);
    for (std::size_t i : rng.SampleIndices(kept.size(), max_objects)) chosen[i] = true;
    std::vector<Detection> sampled;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (chosen[i]) {
        sampled.push_back(kept[i]);
      } else {
        drop(kept[i], "not sampled");
      }
    }
    kept = std::move(sampled);
  }
  std::sort(kept.begin(), kept.end(), ReadingOrder);
  return kept;
}

struct TripletOutcome {
  std::optional<ObjectTriplet> triplet;
  std::optional<DropRecord> drop;
};

TripletOutcome BuildOne(const Raster& image, const std::string& image_b64, const Detection& d,
                        clients::Clients& clients, const std::string& origin_ref) {
  TripletOutcome out;
  try {
    const Json seg = clients.Request(ClientRole::kSegmenter,
                                     {{"image_b64", image_b64}, {"bbox", BoxToJson(d.bbox)}});
    const std::string rle = seg["mask_rle"].get<std::string>();
    Mask mask = DecodeMaskRle(rle);
    if (mask.width != image.width() || mask.height != image.height()) {
      out.drop = DropRecord{"segment", d.label, "mask is " + std::to_string(mask.width) + "x" +
                                                    std::to_string(mask.height) +
                                                    ", image is " + std::to_string(image.width()) +
                                                    "x" + std::to_string(image.height())};
      return out;
    }
    const Box bounds = mask.Bounds();
    if (bounds.Empty()) {
      out.drop = DropRecord{"segment", d.label, "empty mask"};
      return out;
    }
    const Json desc = clients.Request(ClientRole::kRegionDescriber,
                                      {{"image_b64", image_b64}, {"mask_rle", rle}});
    std::string caption = desc["caption"].get<std::string>();
    if (caption.find_first_not_of(" \t\r\n") == std::string::npos) {
      out.drop = DropRecord{"describe", d.label, "empty caption"};
      return out;
    }
    ObjectTriplet t;
    t.label = d.label;
    t.mask = std::move(mask);
    t.object_caption = std::move(caption);
    t.crop.image_bytes = EncodePng(Crop(image, bounds));
    t.crop.source = AssetSource::kBboxCrop;
    t.crop.origin_ref = origin_ref;
    t.crop.bbox = bounds;
    out.triplet = std::move(t);
  } catch (const Error& e) {
    out.drop = DropRecord{"object", d.label, e.what()};
  }
  return out;
}

std::string Feedback(const std::vector<std::string>& problems) {
  std::string out = "The previous answer was rejected:";
  for (const auto& p : problems) out += " " + p + ";";
  out += " Use each [ImageK] marker exactly once, K = 1..N in the order the objects were "
         "listed, and map every marker to the phrase that directly follows it.";
  return out;
}

}  // namespace

void ImageEngineConfig::Validate() const {
  if (!(min_area_ratio > 0 && min_area_ratio < max_area_ratio && max_area_ratio <= 1)) {
    throw Error(ErrorCode::kConfigError, "need 0 < min_area_ratio < max_area_ratio <= 1");
  }
  if (min_objects < 1 || min_objects > max_objects) {
    throw Error(ErrorCode::kConfigError, "need 1 <= min_objects <= max_objects");
  }
  if (!(iou_dedupe_threshold > 0 && iou_dedupe_threshold <= 1)) {
    throw Error(ErrorCode::kConfigError, "iou_dedupe_threshold must be in (0, 1]");
  }
  if (llm_retry_limit < 1) throw Error(ErrorCode::kConfigError, "llm_retry_limit must be >= 1");
}

Json ImageEngineConfig::ToJson() const {
  return {{"min_area_ratio", min_area_ratio},
          {"max_area_ratio", max_area_ratio},
          {"max_objects", max_objects},
          {"min_objects", min_objects},
          {"iou_dedupe_threshold", iou_dedupe_threshold},
          {"llm_retry_limit", llm_retry_limit},
          {"rng_seed", rng_seed}};
}

std::string ImageEngineConfig::Digest() const { return Sha256Hex(ToJson().dump()); }

std::vector<Detection> FilterAndSample(const std::vector<Detection>& detections, int width,
                                       int height, const ImageEngineConfig& config, Rng& rng) {
  return Filter(detections, width, height, config, rng, nullptr);
}

TripletBatch BuildObjectTriplets(const Raster& image, const Bytes& png,
                                 const std::vector<Detection>& detections,
                                 clients::Clients& clients, const std::string& origin_ref,
                                 bool concurrent) {
  if (detections.empty()) throw Error(ErrorCode::kAllDropped, "no detections to process");
  const std::string b64 = Base64Encode(png);
  std::vector<TripletOutcome> outcomes;
  if (concurrent && detections.size() > 1) {
    std::vector<std::future<TripletOutcome>> futures;
    for (const Detection& d : detections) {
      futures.push_back(std::async(std::launch::async, [&, d] {
        return BuildOne(image, b64, d, clients, origin_ref);
      }));
    }
    for (auto& f : futures) outcomes.push_back(f.get());
  } else {
    for (const Detection& d : detections) {
      outcomes.push_back(BuildOne(image, b64, d, clients, origin_ref));
    }
  }
  TripletBatch batch;
  for (auto& o : outcomes) {
    if (o.triplet) batch.triplets.push_back(std::move(*o.triplet));
    if (o.drop) batch.drops.push_back(std::move(*o.drop));
  }
  if (batch.triplets.empty()) {
    throw Error(ErrorCode::kAllDropped,
                "all " + std::to_string(detections.size()) + " detections failed");
  }
  return batch;
}

WeaveResult WeaveInstruction(const std::string& global_caption,
                             const std::vector<WeaveObject>& objects, clients::Clients& clients,
                             int retry_limit) {
  if (objects.empty()) throw Error(ErrorCode::kInvalidArgument, "nothing to weave");
  Json objects_json = Json::array();
  for (const auto& o : objects) objects_json.push_back({{"label", o.label}, {"caption", o.caption}});

  std::vector<std::string> problems;
  for (int attempt = 1; attempt <= retry_limit; ++attempt) {
    Json request = {{"global_caption", global_caption}, {"objects", objects_json}};
    if (!problems.empty()) request["feedback"] = Feedback(problems);
    problems.clear();

    Json response;
    try {
      response = clients.Request(ClientRole::kInstructionWriter, request);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSchemaViolation) throw;
      problems.push_back("malformed response (" + e.detail() + ")");
      continue;
    }
    InterleavedInstruction instr;
    try {
      instr = ParseTemplate(response["interleaved_caption"].get<std::string>());
    } catch (const Error& e) {
      problems.push_back(std::string("caption does not parse (") + e.what() + ")");
      continue;
    }
    if (instr.slot_count() != objects.size()) {
      problems.push_back("caption has " + std::to_string(instr.slot_count()) +
                         " markers for " + std::to_string(objects.size()) + " objects");
    }
    PhraseMapping mapping;
    for (const Json& m : response["mapping"]) {
      mapping.entries.push_back({m["phrase"].get<std::string>(), m["index"].get<int>()});
    }
    const ValidationReport report = ValidateMapping(instr, mapping);
    if (!report.ok()) problems.push_back(report.ToString());
    if (problems.empty()) return {std::move(instr), std::move(mapping), attempt};
  }
  std::string last;
  for (const auto& p : problems) last += (last.empty() ? "" : "; ") + p;
  throw Error(ErrorCode::kWeaveFailed,
              "no valid instruction after " + std::to_string(retry_limit) + " attempts: " + last);
}

ImageSampleResult BuildImageSample(const Bytes& png, const std::string& origin_ref,
                                   clients::Clients& clients, const ImageEngineConfig& config) {
  config.Validate();
  const Raster image = InStage("decode", [&] { return DecodePng(png); });
  const std::string image_digest = Sha256Hex(png);
  const std::string config_digest = config.Digest();
  Rng rng(DeriveSeed(config.rng_seed, image_digest));
  const std::string b64 = Base64Encode(png);

  ImageSampleResult result;
  const std::string caption = InStage("caption", [&] {
    return clients.Request(ClientRole::kCaptioner, {{"image_b64", b64}})["caption"]
        .get<std::string>();
  });
  const Json detected =
      InStage("detect", [&] { return clients.Request(ClientRole::kDetector, {{"image_b64", b64}}); });
  std::vector<Detection> detections;
  for (const Json& d : detected["detections"]) {
    Detection det{d["label"].get<std::string>(), BoxFromJson(d["bbox"]), std::nullopt};
    if (d.contains("score")) det.score = d["score"].get<double>();
    detections.push_back(std::move(det));
  }
  const std::vector<Detection> kept =
      Filter(detections, image.width(), image.height(), config, rng, &result.drops);
  if (kept.size() < static_cast<std::size_t>(config.min_objects)) {
    throw Error(ErrorCode::kSampleRejected,
                "filter: " + std::to_string(kept.size()) + " objects survive filtering, need " +
                    std::to_string(config.min_objects));
  }

  TripletBatch batch = InStage("objects", [&] {
    return BuildObjectTriplets(image, png, kept, clients, origin_ref, config.concurrent_objects);
  });
  result.drops.insert(result.drops.end(), batch.drops.begin(), batch.drops.end());
  const std::size_t n = batch.triplets.size();
  if (n < static_cast<std::size_t>(config.min_objects) ||
      n > static_cast<std::size_t>(config.max_objects)) {
    throw Error(ErrorCode::kSampleRejected, "count: " + std::to_string(n) +
                                                " objects, need " +
                                                std::to_string(config.min_objects) + ".." +
                                                std::to_string(config.max_objects));
  }

  std::vector<WeaveObject> objects;
  for (const auto& t : batch.triplets) objects.push_back({t.label, t.object_caption});
  WeaveResult woven = InStage("weave", [&] {
    return WeaveInstruction(caption, objects, clients, config.llm_retry_limit);
  });

  InterleavedSample& s = result.sample;
  s.sample_id = "img-" + Sha256Hex(image_digest + ":" + config_digest).substr(0, 16);
  s.provenance = Provenance::kImagePipeline;
  s.instruction = std::move(woven.instruction);
  s.mapping = std::move(woven.mapping);
  for (auto& t : batch.triplets) s.assets.push_back(std::move(t.crop));
  s.target_image = png;
  s.engine_config_digest = config_digest;
  result.weave_attempts = woven.attempts;
  return result;
}

std::vector<fs::path> ListCorpus(const fs::path& corpus) {
  std::vector<fs::path> items;
  if (fs::is_directory(corpus)) {
    for (const auto& e : fs::directory_iterator(corpus)) {
      if (e.is_regular_file() && e.path().extension() == ".png") items.push_back(e.path());
    }
    std::sort(items.begin(), items.end());
  } else if (fs::is_regular_file(corpus)) {
    std::ifstream in(corpus);
    for (std::string line; std::getline(in, line);) {
      if (line.empty() || line[0] == '#') continue;
      items.push_back(corpus.parent_path() / line);
    }
  } else {
    throw Error(ErrorCode::kIoFailure, "corpus " + corpus.string() + " not found");
  }
  return items;
}

namespace {

struct ItemOutcome {
  std::optional<InterleavedSample> sample;
  Json audit;
};

Json DropsJson(const std::vector<DropRecord>& drops) {
  Json out = Json::array();
  for (const auto& d : drops) out.push_back({{"stage", d.stage}, {"label", d.label}, {"reason", d.reason}});
  return out;
}

bool IsRejection(ErrorCode code) {
  return code == ErrorCode::kSampleRejected || code == ErrorCode::kAllDropped ||
         code == ErrorCode::kWeaveFailed;
}

}  // namespace

CorpusStats RunImageCorpus(const std::vector<fs::path>& items, clients::Clients& clients,
                           const ImageEngineConfig& config, store::ShardWriter& writer,
                           std::ostream* audit, int workers, const std::atomic<bool>* stop) {
  config.Validate();
  CorpusStats stats;
  std::function<ItemOutcome(std::size_t)> work = [&](std::size_t i) {
    ItemOutcome out;
    const std::string ref = items[i].filename().string();
    out.audit = {{"item", ref}};
    try {
      const Bytes png = ReadFileBytes(items[i].string());
      ImageSampleResult r = BuildImageSample(png, ref, clients, config);
      out.audit["status"] = "accepted";
      out.audit["sample_id"] = r.sample.sample_id;
      out.audit["assets"] = r.sample.assets.size();
      out.audit["weave_attempts"] = r.weave_attempts;
      out.audit["drops"] = DropsJson(r.drops);
      out.sample = std::move(r.sample);
    } catch (const Error& e) {
      out.audit["status"] = IsRejection(e.code()) ? "rejected" : "failed";
      out.audit["code"] = ErrorCodeName(e.code());
      out.audit["reason"] = e.detail();
    }
    return out;
  };
  std::function<void(std::size_t, ItemOutcome&&)> sink = [&](std::size_t, ItemOutcome&& o) {
    ++stats.items;
    if (o.sample) {
      writer.Write(*o.sample);
      ++stats.accepted;
    } else if (o.audit["status"] == "rejected") {
      ++stats.rejected;
    } else {
      ++stats.failed;
    }
    if (audit != nullptr) *audit << o.audit.dump() << '\n';
  };
  OrderedParallelMap<ItemOutcome>(items.size(), workers, work, sink, stop);
  stats.interrupted = stats.items < items.size();
  return stats;
}

}  // namespace forge::image
