// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/dataset_store.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "chi_square.hpp"
#include "sample_factory.hpp"
#include "test_util.hpp"

namespace forge::store {
namespace {

namespace fs = std::filesystem;
using forge::testing::MakeSample;
using forge::testing::TempDir;

std::vector<InterleavedSample> Corpus(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<InterleavedSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(MakeSample(rng, static_cast<int>(i), 3 + static_cast<int>(rng.Below(6)),
                             i % 4 == 0 ? Provenance::kVideoPipeline : Provenance::kImagePipeline));
  }
  return out;
}

TEST(RecordTest, FieldNamesAndOrder) {
  Rng rng(1);
  InterleavedSample s = MakeSample(rng, 7, 3);
  s.assets[0].bbox = Box{1, 2, 6, 5};
  s.assets[1].bbox.reset();
  s.target_image = forge::testing::TinyPng(4);
  const auto j = nlohmann::ordered_json::parse(SerializeRecord(s));
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"sample_id", "provenance", "instruction_text",
                                            "mapping", "asset_digests", "asset_meta",
                                            "target_digest", "engine_config_digest"}));
  EXPECT_EQ(j["asset_meta"][0]["bbox"]["x"], 1);
  EXPECT_FALSE(j["asset_meta"][1].contains("bbox"));
  EXPECT_EQ(j["asset_meta"][0]["source"], "bbox_crop");
  EXPECT_EQ(j["mapping"][0]["index"], 1);
  EXPECT_EQ(j["asset_digests"][0], Sha256Hex(s.assets[0].image_bytes));
  s.target_image.reset();
  EXPECT_FALSE(nlohmann::json::parse(SerializeRecord(s)).contains("target_digest"));
}

TEST(ShardWriterTest, ChunksByMaxRecords) {
  TempDir dir;
  const auto samples = Corpus(25, 2);
  const auto m = WriteShards(samples, dir.path(), {.max_records_per_shard = 10});
  ASSERT_EQ(m.shards.size(), 3u);
  EXPECT_EQ(m.shards[0].count, 10u);
  EXPECT_EQ(m.shards[1].count, 10u);
  EXPECT_EQ(m.shards[2].count, 5u);
  EXPECT_EQ(m.shards[2].path, "shard-00002.ndjson");
  EXPECT_EQ(m.TotalCount(), 25u);
  EXPECT_EQ(m.provenance_counts.at("video_pipeline"), 7u);
  EXPECT_EQ(m.provenance_counts.at("image_pipeline"), 18u);
  EXPECT_EQ(LoadManifest(dir.path()), m);
}

TEST(ShardWriterTest, RoundTripIsExact) {
  TempDir dir;
  const auto samples = Corpus(100, 3);
  WriteShards(samples, dir.path(), {.max_records_per_shard = 33});
  const auto back = ReadAll(dir.path());
  ASSERT_EQ(back.size(), samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(back[i], samples[i]) << i;
    EXPECT_EQ(SerializeRecord(back[i]), SerializeRecord(samples[i]));
  }
}

TEST(ShardWriterTest, BlobsAreContentAddressedAndShared) {
  TempDir dir;
  const auto samples = Corpus(60, 4);
  WriteShards(samples, dir.path());
  std::set<std::string> distinct;
  for (const auto& s : samples) {
    for (const auto& a : s.assets) distinct.insert(Sha256Hex(a.image_bytes));
    if (s.target_image) distinct.insert(Sha256Hex(*s.target_image));
  }
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir.path() / "blobs")) {
    ++files;
    const std::string stem = e.path().stem().string();
    EXPECT_TRUE(distinct.contains(stem)) << stem;
    EXPECT_EQ(Sha256Hex(ReadFileBytes(e.path().string())), stem);
  }
  EXPECT_EQ(files, distinct.size());
}

TEST(ShardWriterTest, InvalidSampleAbortsWithoutManifest) {
  TempDir dir;
  auto samples = Corpus(30, 5);
  samples[25].mapping.entries[0].phrase = "nowhere near";
  EXPECT_ERROR_CODE(WriteShards(samples, dir.path(), {.max_records_per_shard = 10}),
                    ErrorCode::kInvalidSample);
  EXPECT_FALSE(fs::exists(dir.path() / kManifestName));
  EXPECT_FALSE(fs::exists(dir.path() / "shard-00000.ndjson"));
  EXPECT_ERROR_CODE(ReadAll(dir.path()), ErrorCode::kManifestNotFound);
}

TEST(ShardWriterTest, InterruptedCommitLeavesNoManifest) {
  TempDir dir;
  const auto samples = Corpus(20, 6);
  struct Interrupted {};
  EXPECT_THROW(WriteShards(samples, dir.path(),
                           {.before_commit = [] { throw Interrupted{}; }}),
               Interrupted);
  EXPECT_FALSE(fs::exists(dir.path() / kManifestName));
  EXPECT_ERROR_CODE(ShardReader{dir.path()}, ErrorCode::kManifestNotFound);
  // The directory is reusable once the interrupted writer is gone.
  EXPECT_EQ(WriteShards(samples, dir.path()).TotalCount(), 20u);
}

TEST(ShardWriterTest, SingleWriterPerDirectory) {
  TempDir dir;
  ShardWriter first(dir.path());
  EXPECT_ERROR_CODE(ShardWriter(dir.path()), ErrorCode::kIoFailure);
  first.Commit();
  EXPECT_ERROR_CODE(ShardWriter(dir.path()), ErrorCode::kIoFailure);
}

TEST(ShardReaderTest, CorruptShardFailsBeforeAnyRecord) {
  TempDir dir;
  WriteShards(Corpus(30, 7), dir.path(), {.max_records_per_shard = 10});
  const fs::path shard = dir.path() / "shard-00001.ndjson";
  Bytes raw = ReadFileBytes(shard.string());
  raw[raw.size() / 2] ^= 0x01;
  WriteFileAtomic(shard.string(), raw);

  ShardReader reader(dir.path());
  for (int i = 0; i < 10; ++i) ASSERT_TRUE(reader.Next().has_value());
  EXPECT_ERROR_CODE(reader.Next(), ErrorCode::kDigestMismatch);
}

TEST(ShardReaderTest, MissingBlobNamesDigest) {
  TempDir dir;
  const auto samples = Corpus(5, 8);
  WriteShards(samples, dir.path());
  const std::string digest = Sha256Hex(samples[0].assets[0].image_bytes);
  fs::remove(dir.path() / "blobs" / (digest + ".png"));
  try {
    ReadAll(dir.path());
    FAIL() << "expected MissingBlob";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingBlob);
    EXPECT_NE(std::string(e.what()).find(digest), std::string::npos);
  }
}

TEST(ShardReaderTest, RewindRestartsFromFirstShard) {
  TempDir dir;
  const auto samples = Corpus(12, 9);
  WriteShards(samples, dir.path(), {.max_records_per_shard = 5});
  ShardReader reader(dir.path());
  for (int i = 0; i < 7; ++i) reader.Next();
  reader.Rewind();
  EXPECT_EQ(reader.Next()->sample_id, samples[0].sample_id);
}

TEST(MixSpecTest, NormalizationAndValidation) {
  MixSpec spec{{{"a", 2.0}, {"b", 6.0}}, 1};
  EXPECT_EQ(spec.NormalizedWeights(), (std::vector<double>{0.25, 0.75}));
  spec.sources[0].second = 0;
  EXPECT_ERROR_CODE(spec.NormalizedWeights(), ErrorCode::kInvalidArgument);
  EXPECT_ERROR_CODE(MixSpec{}.NormalizedWeights(), ErrorCode::kInvalidArgument);
  const auto parsed = MixSpec::FromJson(nlohmann::json::parse(
      R"({"sources":[{"id":"x","weight":0.5}],"seed":9})"));
  EXPECT_EQ(parsed.sources[0].first, "x");
  EXPECT_EQ(parsed.seed, 9u);
}

std::map<std::string, std::unique_ptr<SampleSource>> Sources(
    const std::vector<std::pair<std::string, std::size_t>>& sizes) {
  std::map<std::string, std::unique_ptr<SampleSource>> out;
  Rng rng(10);
  int id = 0;
  for (const auto& [name, n] : sizes) {
    std::vector<InterleavedSample> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(MakeSample(rng, id++, 3));
    out[name] = std::make_unique<VectorSource>(std::move(v));
  }
  return out;
}

TEST(MixStreamTest, SingleSourceCyclesInOrder) {
  MixStream mix(Sources({{"only", 3}}), MixSpec{{{"only", 1.0}}, 4});
  std::vector<std::string> ids;
  for (int i = 0; i < 7; ++i) ids.push_back(mix.Next().second.sample_id);
  EXPECT_EQ(ids, (std::vector<std::string>{"s0", "s1", "s2", "s0", "s1", "s2", "s0"}));
}

TEST(MixStreamTest, DeterministicUnderSeed) {
  const MixSpec spec{{{"a", 0.2}, {"b", 0.2}, {"c", 0.1}, {"d", 0.5}}, 77};
  MixStream x(Sources({{"a", 2}, {"b", 3}, {"c", 1}, {"d", 4}}), spec);
  MixStream y(Sources({{"a", 2}, {"b", 3}, {"c", 1}, {"d", 4}}), spec);
  for (int i = 0; i < 500; ++i) {
    const auto p = x.Next(), q = y.Next();
    ASSERT_EQ(p.first, q.first);
    ASSERT_EQ(p.second.sample_id, q.second.sample_id);
  }
}

TEST(ChiSquareTest, MatchesTabulatedCriticalValues) {
  EXPECT_NEAR(testing::ChiSquareSurvival3(11.3449), 0.01, 1e-5);
  EXPECT_NEAR(testing::ChiSquareSurvival3(7.8147), 0.05, 1e-5);
  EXPECT_NEAR(testing::ChiSquareSurvival3(0.5844), 0.90, 1e-4);
  EXPECT_EQ(testing::ChiSquareSurvival3(0.0), 1.0);
}

TEST(MixStreamTest, ProportionsMatchWeights) {
  const MixSpec spec{{{"image", 0.2}, {"video", 0.2}, {"edit", 0.1}, {"t2i", 0.5}}, 2026};
  MixStream mix(Sources({{"image", 3}, {"video", 2}, {"edit", 1}, {"t2i", 4}}), spec);
  std::vector<std::size_t> counts(4, 0);
  constexpr int kDraws = 100000;
  for (int i = 0; i < kDraws; ++i) ++counts[mix.DrawSource()];
  const std::vector<double> p = {0.2, 0.2, 0.1, 0.5};
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_NEAR(static_cast<double>(counts[k]) / kDraws, p[k], 0.005) << spec.sources[k].first;
  }
  EXPECT_GT(testing::ChiSquareSurvival3(testing::ChiSquare(counts, p)), 0.01);
}

TEST(MixStreamTest, EmptyAndMissingSources) {
  EXPECT_ERROR_CODE(MixStream(Sources({{"a", 2}, {"b", 0}}), MixSpec{{{"a", 1}, {"b", 1}}, 1}),
                    ErrorCode::kEmptySource);
  EXPECT_ERROR_CODE(MixStream(Sources({{"a", 2}}), MixSpec{{{"a", 1}, {"z", 1}}, 1}),
                    ErrorCode::kInvalidArgument);
}

TEST(MixStreamTest, ShardSourceFeedsTheMix) {
  TempDir dir;
  const auto samples = Corpus(4, 11);
  WriteShards(samples, dir.path());
  std::map<std::string, std::unique_ptr<SampleSource>> src;
  src["disk"] = std::make_unique<ShardSource>(dir.path());
  MixStream mix(std::move(src), MixSpec{{{"disk", 1.0}}, 2});
  for (int i = 0; i < 9; ++i) EXPECT_EQ(mix.Next().second, samples[i % 4]);
}

}  // namespace
}  // namespace forge::store
