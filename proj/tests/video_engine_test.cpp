// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/video_engine.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "forge/dataset_store.hpp"
#include "forge/digest.hpp"
#include "forge/synthetic.hpp"
#include "forge/synthetic_world.hpp"
#include "test_util.hpp"

namespace forge::video {
namespace {

using clients::Clients;
using clients::ClientRole;
using clients::Json;
using clients::MockTransport;
using clients::RecordingTransport;
using testing::TempDir;

Clients Recording(clients::Responder responder) {
  return Clients::Mock(std::make_shared<RecordingTransport>(std::move(responder)));
}

Frame ToFrame(const synth::ClipFrame& f) { return {f.time, f.image, f.png}; }

Frame TexturedFrame(double time, int w, int h, std::uint64_t seed) {
  Frame f;
  f.time = time;
  f.image = synth::TexturedPatch(w, h, seed);
  f.png = EncodePng(f.image);
  return f;
}

// ---- SelectFramePairs -------------------------------------------------------

TEST(FramePairTest, CandidatesFollowTheGapWindow) {
  const std::vector<double> times = {0, 1, 3, 6, 12};
  // Hand enumeration of gaps in [2, 10].
  const std::set<std::pair<double, double>> allowed = {{0, 3}, {0, 6}, {1, 3}, {1, 6},
                                                       {3, 6}, {3, 12}, {6, 12}};
  VideoEngineConfig config;
  config.pairs_per_video = 10;
  std::set<std::pair<double, double>> seen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const auto pairs = SelectFramePairs(times, config, rng);
    std::set<double> sources;
    for (const auto& p : pairs) {
      EXPECT_TRUE(allowed.contains(p)) << p.first << "," << p.second;
      EXPECT_TRUE(sources.insert(p.first).second) << "source reused";
      seen.insert(p);
    }
    EXPECT_TRUE(std::is_sorted(pairs.begin(), pairs.end()));
    // Every source with a valid partner is used once the budget allows it.
    EXPECT_EQ(pairs.size(), 4u);
  }
  EXPECT_EQ(seen, allowed);
}

TEST(FramePairTest, DeterministicUnderSeedAndBudgeted) {
  const std::vector<double> times = {0, 1.5, 3, 4.5, 7, 12};
  VideoEngineConfig config;
  Rng a(5), b(5);
  const auto first = SelectFramePairs(times, config, a);
  EXPECT_EQ(first, SelectFramePairs(times, config, b));
  EXPECT_LE(first.size(), 4u);
  config.pairs_per_video = 1;
  Rng c(5);
  EXPECT_EQ(SelectFramePairs(times, config, c).size(), 1u);
}

TEST(FramePairTest, NoValidPairs) {
  VideoEngineConfig config;
  Rng rng(1);
  EXPECT_ERROR_CODE(SelectFramePairs({0.0}, config, rng), ErrorCode::kNoValidPairs);
  EXPECT_ERROR_CODE(SelectFramePairs({0.0, 1.0}, config, rng), ErrorCode::kNoValidPairs);
  EXPECT_ERROR_CODE(SelectFramePairs({0.0, 20.0}, config, rng), ErrorCode::kNoValidPairs);
}

TEST(FramePairTest, PropertyGapsStayInsideTheWindow) {
  Rng gen(77);
  for (int trial = 0; trial < 300; ++trial) {
    VideoEngineConfig config;
    config.min_gap = 0.5 + 3 * gen.Uniform01();
    config.max_gap = config.min_gap + 10 * gen.Uniform01();
    config.pairs_per_video = static_cast<int>(gen.Between(1, 6));
    std::vector<double> times;
    double t = 0;
    const int n = static_cast<int>(gen.Between(1, 12));
    for (int i = 0; i < n; ++i) {
      t += 0.25 + 4 * gen.Uniform01();
      times.push_back(t);
    }
    Rng rng(static_cast<std::uint64_t>(trial));
    try {
      const auto pairs = SelectFramePairs(times, config, rng);
      ASSERT_FALSE(pairs.empty());
      EXPECT_LE(pairs.size(), static_cast<std::size_t>(config.pairs_per_video));
      std::set<double> sources;
      for (const auto& [s, e] : pairs) {
        EXPECT_GT(e, s);
        EXPECT_GE(e - s, config.min_gap - 1e-9);
        EXPECT_LE(e - s, config.max_gap + 1e-9);
        EXPECT_TRUE(sources.insert(s).second);
      }
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::kNoValidPairs);
      for (std::size_t i = 0; i < times.size(); ++i) {
        for (std::size_t j = i + 1; j < times.size(); ++j) {
          const double gap = times[j] - times[i];
          EXPECT_FALSE(gap >= config.min_gap && gap <= config.max_gap);
        }
      }
    }
  }
}

// ---- CorrespondEntities -----------------------------------------------------

TEST(CorrespondTest, BoxesAreSplitAtTheSeam) {
  const FramePair pair{TexturedFrame(0, 100, 80, 1), TexturedFrame(3, 100, 80, 2)};
  Json seen_request;
  Clients c = Recording([&](ClientRole role, const Json& req) -> Json {
    EXPECT_EQ(role, ClientRole::kCorrespondenceVlm);
    seen_request = req;
    return {{"matches",
             {{{"label", "cup"}, {"bbox_left", {5, 6, 20, 30}}, {"bbox_right", {110, 12, 25, 20}}},
              {{"label", "seam"}, {"bbox_left", {90, 6, 20, 20}}, {"bbox_right", {150, 6, 20, 20}}},
              {{"label", "late"}, {"bbox_left", {5, 6, 20, 20}}, {"bbox_right", {95, 6, 20, 20}}},
              {{"label", "edge"}, {"bbox_left", {0, 0, 100, 80}}, {"bbox_right", {100, 0, 100, 80}}}}}};
  });
  const auto matches = CorrespondEntities(pair, c);
  ASSERT_EQ(matches.size(), 2u);
  EXPECT_EQ(matches[0], (EntityMatch{"cup", {5, 6, 20, 30}, {10, 12, 25, 20}}));
  EXPECT_EQ(matches[1], (EntityMatch{"edge", {0, 0, 100, 80}, {0, 0, 100, 80}}));
  const Raster composite = DecodePng(Base64Decode(seen_request["image_b64"].get<std::string>()));
  EXPECT_EQ(composite.width(), 200);
  EXPECT_EQ(composite.height(), 80);
  EXPECT_EQ(seen_request["prompt"], kCorrespondencePrompt);
}

TEST(CorrespondTest, ShorterTargetIsScaledBack) {
  // Target is half height, so it is drawn at 2x on the right.
  const FramePair pair{TexturedFrame(0, 100, 80, 1), TexturedFrame(3, 50, 40, 2)};
  Clients c = Recording([&](ClientRole, const Json&) -> Json {
    return {{"matches",
             {{{"label", "cup"}, {"bbox_left", {5, 6, 20, 30}}, {"bbox_right", {120, 20, 40, 40}}},
              {{"label", "out"}, {"bbox_left", {5, 6, 20, 30}}, {"bbox_right", {160, 20, 60, 40}}}}}};
  });
  const auto matches = CorrespondEntities(pair, c);
  ASSERT_EQ(matches.size(), 1u);
  EXPECT_EQ(matches[0].bbox_target, (Box{10, 10, 20, 20}));
}

TEST(CorrespondTest, EmptyMatchListIsValid) {
  const FramePair pair{TexturedFrame(0, 64, 64, 1), TexturedFrame(3, 64, 64, 2)};
  Clients c = Recording([](ClientRole, const Json&) -> Json { return {{"matches", Json::array()}}; });
  EXPECT_TRUE(CorrespondEntities(pair, c).empty());
}

// ---- DynamicFilter ----------------------------------------------------------

struct VerifierScript {
  bool changed = true;
  std::shared_ptr<int> calls = std::make_shared<int>(0);
  Json operator()(ClientRole role, const Json&) const {
    EXPECT_EQ(role, ClientRole::kChangeVerifier);
    ++*calls;
    return {{"changed", changed}, {"reason", changed ? "pose changed" : "same"}};
  }
};

TEST(DynamicFilterTest, IdenticalCropsAreStaticWithoutVerifierCall) {
  const Frame f = TexturedFrame(0, 120, 120, 9);
  const FramePair pair{f, {3, f.image, f.png}};
  VerifierScript script;
  Clients c = Recording(script);
  const FilterDecision d = DynamicFilter({"mug", {10, 10, 80, 80}, {10, 10, 80, 80}}, pair, c, {});
  EXPECT_EQ(d.verdict, FilterVerdict::kStatic);
  EXPECT_GE(d.similarity.score, 0.95);
  EXPECT_FALSE(d.verifier_called);
  EXPECT_EQ(*script.calls, 0);
}

TEST(DynamicFilterTest, VerifierDecidesDissimilarCrops) {
  const FramePair pair{TexturedFrame(0, 120, 120, 9), TexturedFrame(3, 120, 120, 10)};
  const EntityMatch m{"mug", {10, 10, 80, 80}, {10, 10, 80, 80}};
  for (bool changed : {true, false}) {
    VerifierScript script{changed};
    Clients c = Recording(script);
    const FilterDecision d = DynamicFilter(m, pair, c, {});
    EXPECT_LT(d.similarity.score, 0.6);
    EXPECT_TRUE(d.verifier_called);
    EXPECT_EQ(*script.calls, 1);
    EXPECT_EQ(d.verdict, changed ? FilterVerdict::kKeep : FilterVerdict::kNoSemanticChange);
  }
}

TEST(DynamicFilterTest, LowTextureGoesToTheVerifier) {
  Frame flat;
  flat.image = Raster(64, 64, 128);
  flat.png = EncodePng(flat.image);
  const FramePair pair{flat, {3, flat.image, flat.png}};
  VerifierScript script{false};
  Clients c = Recording(script);
  const FilterDecision d = DynamicFilter({"wall", {0, 0, 64, 64}, {0, 0, 64, 64}}, pair, c, {});
  EXPECT_TRUE(d.similarity.low_texture);
  EXPECT_EQ(d.similarity.score, 0.0);
  EXPECT_EQ(d.verdict, FilterVerdict::kNoSemanticChange);
  EXPECT_EQ(*script.calls, 1);
}

TEST(DynamicFilterTest, ThresholdIsConfigurable) {
  const FramePair pair{TexturedFrame(0, 120, 120, 9), TexturedFrame(3, 120, 120, 10)};
  VerifierScript script;
  Clients c = Recording(script);
  orb::OrbConfig lenient;
  lenient.static_similarity_threshold = 1e-9;
  // Any match at all now counts as static, and zero matches still reach the verifier.
  const FilterDecision d = DynamicFilter({"mug", {10, 10, 80, 80}, {10, 10, 80, 80}}, pair, c, lenient);
  EXPECT_EQ(d.verdict == FilterVerdict::kStatic, d.similarity.score > 0);
  EXPECT_EQ(d.verifier_called, d.similarity.score == 0);
}

// ---- End to end over synthetic clips ----------------------------------------

struct ClipFixture {
  synth::Clip clip;
  synth::World world;
  explicit ClipFixture(std::uint64_t seed, synth::ClipOptions opts = {}) {
    clip = synth::MakeClip(seed, "clip-" + std::to_string(seed), opts);
    world.AddClip(clip);
  }
  FramePair Pair(std::size_t s, std::size_t t) const {
    return {ToFrame(clip.frames[s]), ToFrame(clip.frames[t])};
  }
};

TEST(VideoSampleTest, StaticObjectsAreFilteredAndSourceCropsBecomeAssets) {
  ClipFixture f(21);
  auto counts = std::make_shared<std::map<ClientRole, int>>();
  Clients c = Recording([&, responder = f.world.AsResponder()](ClientRole role, const Json& req) {
    ++(*counts)[role];
    return responder(role, req);
  });
  const FramePair pair = f.Pair(0, 3);
  const auto matches = CorrespondEntities(pair, c);
  ASSERT_EQ(matches.size(), 3u);  // the seam-straddling shadow is gone
  std::vector<EntityMatch> kept;
  int non_static = 0;
  for (const auto& m : matches) {
    const FilterDecision d = DynamicFilter(m, pair, c, {});
    if (d.verdict != FilterVerdict::kStatic) ++non_static;
    if (d.verdict == FilterVerdict::kKeep) kept.push_back(m);
  }
  EXPECT_EQ(non_static, 2);
  EXPECT_EQ((*counts)[ClientRole::kChangeVerifier], non_static);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].label, f.clip.frames[0].objects[1].label);
  EXPECT_EQ(kept[0].bbox_source, f.clip.frames[0].objects[1].bbox);
  EXPECT_EQ(kept[0].bbox_target, f.clip.frames[3].objects[1].bbox);

  const InterleavedSample s = BuildVideoSample(pair, kept, c, {}, "clip@0");
  EXPECT_TRUE(CheckSample(s, true).empty());
  EXPECT_EQ(s.provenance, Provenance::kVideoPipeline);
  ASSERT_EQ(s.assets.size(), 2u);
  for (std::size_t k = 0; k < s.assets.size(); ++k) {
    EXPECT_EQ(s.assets[k].source, AssetSource::kSourceFrameCrop);
    // Assets follow reading order of the source boxes.
    ASSERT_TRUE(s.assets[k].bbox.has_value());
    const Box b = *s.assets[k].bbox;
    EXPECT_TRUE(std::any_of(kept.begin(), kept.end(),
                            [&](const EntityMatch& m) { return m.bbox_source == b; }));
    EXPECT_EQ(DecodePng(s.assets[k].image_bytes), Crop(pair.source.image, b));
  }
  EXPECT_EQ(*s.target_image, pair.target.png);
  // The caption describes the target frame, object by object.
  EXPECT_NE(RenderTemplate(s.instruction).find(f.clip.frames[3].caption), std::string::npos);
}

TEST(VideoSampleTest, NoKeptMatchesIsRejected) {
  ClipFixture f(22);
  Clients c = Recording(f.world.AsResponder());
  EXPECT_ERROR_CODE(BuildVideoSample(f.Pair(0, 2), {}, c, {}, "x"), ErrorCode::kSampleRejected);
}

TEST(VideoSampleTest, FlatObjectsFailTheSemanticStage) {
  synth::ClipOptions opts;
  opts.motions = {synth::ObjectMotion::kFlat, synth::ObjectMotion::kDynamic};
  ClipFixture f(23, opts);
  Clients c = Recording(f.world.AsResponder());
  const FramePair pair = f.Pair(1, 4);
  const auto matches = CorrespondEntities(pair, c);
  ASSERT_EQ(matches.size(), 2u);
  const FilterDecision flat = DynamicFilter(matches[0], pair, c, {});
  EXPECT_TRUE(flat.similarity.low_texture);
  EXPECT_EQ(flat.verdict, FilterVerdict::kNoSemanticChange);
  EXPECT_EQ(DynamicFilter(matches[1], pair, c, {}).verdict, FilterVerdict::kKeep);
}

TEST(VideoSampleTest, FrozenClipYieldsOnlyRejectedPairs) {
  synth::ClipOptions opts;
  opts.frozen = true;
  ClipFixture f(24, opts);
  Clients c = Recording(f.world.AsResponder());
  FrameSequence seq{"frozen", {}};
  for (const auto& fr : f.clip.frames) seq.frames.push_back(ToFrame(fr));
  const auto outcomes = ProcessVideo(seq, c, {});
  ASSERT_FALSE(outcomes.empty());
  for (const auto& o : outcomes) {
    EXPECT_EQ(o.status, "rejected");
    for (const auto& d : o.decisions) {
      EXPECT_EQ(d.verdict, FilterVerdict::kStatic);
      EXPECT_FALSE(d.verifier_called);
    }
  }
}

TEST(FrameSequenceTest, SaveLoadRoundTripAndListing) {
  ClipFixture f(25);
  TempDir dir("videos");
  FrameSequence seq{"clip-25", {}};
  for (const auto& fr : f.clip.frames) seq.frames.push_back(ToFrame(fr));
  SaveFrameSequence(seq, dir.path() / "clip-25");
  SaveFrameSequence(seq, dir.path() / "clip-03");
  const FrameSequence loaded = LoadFrameSequence(dir.path() / "clip-25");
  EXPECT_EQ(loaded.name, "clip-25");
  ASSERT_EQ(loaded.frames.size(), seq.frames.size());
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    EXPECT_EQ(loaded.frames[i].time, seq.frames[i].time);
    EXPECT_EQ(loaded.frames[i].png, seq.frames[i].png);
  }
  const auto videos = ListVideos(dir.path());
  ASSERT_EQ(videos.size(), 2u);
  EXPECT_EQ(videos[0].filename(), "clip-03");
  EXPECT_EQ(ListVideos(dir.path() / "clip-25").size(), 1u);
  EXPECT_ERROR_CODE(LoadFrameSequence(dir.path()), ErrorCode::kIoFailure);
  WriteFileAtomic((dir.path() / "clip-03" / "frames.json").string(),
                  std::string(R"({"frames":[{"file":"000.png","time":1},{"file":"001.png","time":1}]})"));
  EXPECT_ERROR_CODE(LoadFrameSequence(dir.path() / "clip-03"), ErrorCode::kDecodeFailure);
}

TEST(VideoCorpusTest, ReplayedRunsWriteIdenticalShards) {
  TempDir videos("videos");
  synth::World world;
  for (std::uint64_t i = 0; i < 4; ++i) {
    synth::ClipOptions opts;
    opts.frozen = i == 2;
    const synth::Clip clip = synth::MakeClip(40 + i, "clip", opts);
    world.AddClip(clip);
    FrameSequence seq{"", {}};
    for (const auto& fr : clip.frames) seq.frames.push_back(ToFrame(fr));
    SaveFrameSequence(seq, videos.path() / ("clip-" + std::to_string(i)));
  }
  // A video too short to pair.
  FrameSequence short_seq{"", {TexturedFrame(0, 64, 64, 1)}};
  SaveFrameSequence(short_seq, videos.path() / "clip-9");

  const auto items = ListVideos(videos.path());
  ASSERT_EQ(items.size(), 5u);
  auto recorder = std::make_shared<RecordingTransport>(world.AsResponder());
  Clients live = Clients::Mock(recorder);
  TempDir out_a("va"), out_b("vb");
  std::ostringstream audit_a, audit_b;
  VideoCorpusStats stats;
  {
    store::ShardWriter w(out_a.str(), {});
    stats = RunVideoCorpus(items, live, {}, w, &audit_a, 1);
    w.Commit();
  }
  EXPECT_EQ(stats.videos, 5u);
  EXPECT_EQ(stats.failed_videos, 1u);
  EXPECT_EQ(stats.failed, 0u);
  EXPECT_GT(stats.accepted, 0u);
  EXPECT_GT(stats.rejected, 0u);  // the frozen clip
  EXPECT_EQ(stats.pairs, stats.accepted + stats.rejected);
  Clients replay = Clients::Mock(std::make_shared<MockTransport>(recorder->transcript()));
  {
    store::ShardWriter w(out_b.str(), {});
    RunVideoCorpus(items, replay, {}, w, &audit_b, 3);
    w.Commit();
  }
  EXPECT_EQ(audit_a.str(), audit_b.str());
  const auto sa = store::ReadAll(out_a.path()), sb = store::ReadAll(out_b.path());
  ASSERT_EQ(sa.size(), stats.accepted);
  EXPECT_EQ(sa, sb);
  for (const auto& s : sa) {
    EXPECT_TRUE(CheckSample(s, true).empty());
    for (const auto& a : s.assets) EXPECT_EQ(a.source, AssetSource::kSourceFrameCrop);
  }
}

}  // namespace
}  // namespace forge::video
