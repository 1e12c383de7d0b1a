// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/sample.hpp"

#include "forge/error.hpp"

namespace forge {

std::string_view AssetSourceName(AssetSource source) {
  switch (source) {
    case AssetSource::kFullImage: return "full_image";
    case AssetSource::kBboxCrop: return "bbox_crop";
    case AssetSource::kMaskedCrop: return "masked_crop";
    case AssetSource::kSourceFrameCrop: return "source_frame_crop";
  }
  return "unknown";
}

AssetSource ParseAssetSource(std::string_view name) {
  if (name == "full_image") return AssetSource::kFullImage;
  if (name == "bbox_crop") return AssetSource::kBboxCrop;
  if (name == "masked_crop") return AssetSource::kMaskedCrop;
  if (name == "source_frame_crop") return AssetSource::kSourceFrameCrop;
  throw Error(ErrorCode::kInvalidArgument, "unknown asset source " + std::string(name));
}

std::string_view ProvenanceName(Provenance provenance) {
  switch (provenance) {
    case Provenance::kImagePipeline: return "image_pipeline";
    case Provenance::kVideoPipeline: return "video_pipeline";
    case Provenance::kBenchmark: return "benchmark";
  }
  return "unknown";
}

Provenance ParseProvenance(std::string_view name) {
  if (name == "image_pipeline") return Provenance::kImagePipeline;
  if (name == "video_pipeline") return Provenance::kVideoPipeline;
  if (name == "benchmark") return Provenance::kBenchmark;
  throw Error(ErrorCode::kInvalidArgument, "unknown provenance " + std::string(name));
}

std::vector<std::string> CheckSample(const InterleavedSample& sample,
                                     bool decode_assets) {
  std::vector<std::string> problems;
  if (sample.sample_id.empty()) problems.push_back("empty sample_id");
  const std::size_t slots = sample.instruction.slot_count();
  if (sample.assets.size() != slots) {
    problems.push_back("asset count " + std::to_string(sample.assets.size()) +
                       " != slot count " + std::to_string(slots));
  }
  const ValidationReport report = ValidateMapping(sample.instruction, sample.mapping);
  if (!report.ok()) problems.push_back("mapping: " + report.ToString());
  if (sample.provenance == Provenance::kImagePipeline &&
      (sample.assets.size() < kImageSampleMinAssets ||
       sample.assets.size() > kImageSampleMaxAssets)) {
    problems.push_back("image-pipeline sample carries " +
                       std::to_string(sample.assets.size()) + " assets");
  }
  for (std::size_t i = 0; i < sample.assets.size(); ++i) {
    const VisualAsset& asset = sample.assets[i];
    if (sample.provenance == Provenance::kVideoPipeline &&
        asset.source != AssetSource::kSourceFrameCrop) {
      problems.push_back("video asset " + std::to_string(i + 1) +
                         " is not a source-frame crop");
    }
    if (asset.image_bytes.empty()) {
      problems.push_back("asset " + std::to_string(i + 1) + " has no image bytes");
      continue;
    }
    if (asset.bbox && (asset.bbox->x < 0 || asset.bbox->y < 0 || asset.bbox->Empty())) {
      problems.push_back("asset " + std::to_string(i + 1) + " has an invalid bbox");
    }
    if (decode_assets) {
      try {
        const Raster r = DecodePng(asset.image_bytes);
        if (asset.bbox && (asset.bbox->w != r.width() || asset.bbox->h != r.height())) {
          problems.push_back("asset " + std::to_string(i + 1) +
                             " dimensions disagree with its bbox");
        }
      } catch (const Error& e) {
        problems.push_back("asset " + std::to_string(i + 1) + ": " + e.what());
      }
    }
  }
  return problems;
}

}  // namespace forge
