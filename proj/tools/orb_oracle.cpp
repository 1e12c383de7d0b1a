// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Regenerates tests/fixtures/orb: writes the patch PNGs and scores every
// fixture pair with OpenCV's ORB configured like forge::orb (single pyramid
// level, Harris ranking, same thresholds). The JSON it writes is the oracle
// the matcher tests compare against.
//
//   forge_orb_oracle <fixture-dir>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/features2d.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "forge/digest.hpp"
#include "forge/orb.hpp"
#include "forge/synthetic.hpp"

namespace fs = std::filesystem;
using forge::Raster;

namespace {

struct Scored {
  double score = 0;
  int kp_a = 0;
  int kp_b = 0;
};

Scored ReferenceScore(const fs::path& a, const fs::path& b, const forge::orb::OrbConfig& cfg) {
  auto load = [](const fs::path& p) {
    cv::Mat bgr = cv::imread(p.string(), cv::IMREAD_COLOR);
    cv::Mat gray;
    cv::cvtColor(bgr, gray, cv::COLOR_BGR2GRAY);
    return gray;
  };
  auto orb = cv::ORB::create(cfg.max_keypoints, 1.2f, 1, forge::orb::kEdgeThreshold, 0, 2,
                             cv::ORB::HARRIS_SCORE, forge::orb::kPatchSize, cfg.fast_threshold);
  std::vector<cv::KeyPoint> ka, kb;
  cv::Mat da, db;
  orb->detectAndCompute(load(a), cv::noArray(), ka, da);
  orb->detectAndCompute(load(b), cv::noArray(), kb, db);
  Scored s{0, static_cast<int>(ka.size()), static_cast<int>(kb.size())};
  if (ka.empty() || kb.size() < 2) return s;
  cv::BFMatcher matcher(cv::NORM_HAMMING);
  std::vector<std::vector<cv::DMatch>> knn;
  matcher.knnMatch(da, db, knn, 2);
  int good = 0;
  for (const auto& m : knn) {
    if (m.size() == 2 && m[0].distance < cfg.match_ratio * m[1].distance) ++good;
  }
  s.score = std::min(1.0, static_cast<double>(good) / std::min(ka.size(), kb.size()));
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: forge_orb_oracle <fixture-dir>\n");
    return 2;
  }
  const fs::path dir = argv[1];
  fs::create_directories(dir);
  const forge::orb::OrbConfig cfg;

  std::vector<std::pair<std::string, Raster>> patches;
  nlohmann::json pairs = nlohmann::json::array();
  auto add = [&](const std::string& name, const Raster& r) {
    patches.emplace_back(name, r);
    forge::WriteFileAtomic(dir / (name + ".png"), forge::EncodePng(r));
  };
  auto pair = [&](const std::string& a, const std::string& b, const std::string& kind) {
    pairs.push_back({{"a", a + ".png"}, {"b", b + ".png"}, {"kind", kind}});
  };

  constexpr int kSide = 160;
  constexpr int kMargin = 40;
  for (std::uint64_t seed : {11, 12, 13}) {
    const std::string p = "t" + std::to_string(seed);
    // Rendered at twice the size and downsampled so edges are anti-aliased;
    // hard staircase edges turn into spurious corners once rotated.
    constexpr int kCanvas = kSide + 2 * kMargin;
    const Raster canvas = forge::ResizeBilinear(
        forge::synth::TexturedPatch(2 * kCanvas, 2 * kCanvas, seed, 220), kCanvas, kCanvas);
    const forge::Box window{kMargin, kMargin, kSide, kSide};
    const Raster base = forge::Crop(canvas, window);
    add(p + "_base", base);
    add(p + "_shift", forge::Crop(canvas, {kMargin + 9, kMargin + 6, kSide, kSide}));
    for (int deg : {15, 30, 90}) {
      add(p + "_rot" + std::to_string(deg),
          forge::Crop(forge::synth::Rotate(canvas, deg, {0, 0, 0}), window));
    }
    add(p + "_bright", forge::synth::Brighten(base, 25));
    add(p + "_noise", forge::synth::NoisePatch(kSide, kSide, seed + 100));
    add(p + "_other", forge::ResizeBilinear(
                             forge::synth::TexturedPatch(2 * kSide, 2 * kSide, seed + 200, 80),
                             kSide, kSide));

    pair(p + "_base", p + "_base", "identical");
    pair(p + "_base", p + "_shift", "translated");
    pair(p + "_base", p + "_rot15", "rotated");
    pair(p + "_base", p + "_rot30", "rotated");
    pair(p + "_base", p + "_rot90", "rotated");
    pair(p + "_base", p + "_bright", "photometric");
    pair(p + "_base", p + "_noise", "noise");
    pair(p + "_base", p + "_other", "unrelated");
  }

  for (auto& entry : pairs) {
    const Scored s = ReferenceScore(dir / entry["a"].get<std::string>(),
                                    dir / entry["b"].get<std::string>(), cfg);
    entry["score"] = s.score;
    entry["keypoints_a"] = s.kp_a;
    entry["keypoints_b"] = s.kp_b;
  }
  const nlohmann::json doc = {
      {"reference", std::string("opencv ") + CV_VERSION},
      {"params",
       {{"max_keypoints", cfg.max_keypoints},
        {"fast_threshold", cfg.fast_threshold},
        {"match_ratio", cfg.match_ratio},
        {"nlevels", 1},
        {"edge_threshold", forge::orb::kEdgeThreshold},
        {"patch_size", forge::orb::kPatchSize}}},
      {"pairs", pairs}};
  forge::WriteFileAtomic(dir / "oracle.json", doc.dump(2) + "\n");
  std::printf("wrote %zu patches and %zu pairs to %s\n", patches.size(), pairs.size(),
              dir.c_str());
  return 0;
}
