// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Sharded newline-delimited sample records with a content-addressed blob
// directory and a manifest that is written last.
//
//   <dir>/manifest.json
//   <dir>/shard-00000.ndjson ...
//   <dir>/blobs/<sha256>.png

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/rng.hpp"
#include "forge/sample.hpp"

namespace forge::store {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kManifestName = "manifest.json";

struct ShardEntry {
  std::string path;  // relative to the dataset directory
  std::size_t count = 0;
  std::string digest;  // sha256 of the shard file
  friend bool operator==(const ShardEntry&, const ShardEntry&) = default;
};

struct ShardManifest {
  int schema_version = kSchemaVersion;
  std::vector<ShardEntry> shards;
  std::map<std::string, std::size_t> provenance_counts;

  std::size_t TotalCount() const;
  nlohmann::json ToJson() const;
  // Throws Error(kSchemaViolation).
  static ShardManifest FromJson(const nlohmann::json& j);
  friend bool operator==(const ShardManifest&, const ShardManifest&) = default;
};

// One record line (no trailing newline). Field order is fixed, so equal
// samples serialize to equal bytes.
std::string SerializeRecord(const InterleavedSample& sample);

struct WriterOptions {
  std::size_t max_records_per_shard = 10000;
  // Runs after the last shard is on disk and before the manifest rename.
  std::function<void()> before_commit;
};

// Single writer per directory, enforced with an advisory lock on <dir>/.lock.
// Dropping an uncommitted writer removes the shard files it wrote.
class ShardWriter {
 public:
  // Throws Error(kIoFailure) when the directory holds a manifest already or
  // another writer holds the lock.
  ShardWriter(std::filesystem::path dir, WriterOptions options = {});
  ~ShardWriter();
  ShardWriter(const ShardWriter&) = delete;
  ShardWriter& operator=(const ShardWriter&) = delete;

  // Throws Error(kInvalidSample) and aborts the whole write.
  void Write(const InterleavedSample& sample);
  ShardManifest Commit();

  std::size_t written() const { return written_; }

 private:
  void FlushShard();
  void Abort();
  std::string StoreBlob(const Bytes& png);

  std::filesystem::path dir_;
  WriterOptions options_;
  int lock_fd_ = -1;
  bool done_ = false;
  std::size_t written_ = 0;
  std::string pending_;
  std::size_t pending_count_ = 0;
  ShardManifest manifest_;
  std::vector<std::filesystem::path> shard_files_;
};

ShardManifest WriteShards(const std::vector<InterleavedSample>& samples,
                          const std::filesystem::path& dir, WriterOptions options = {});

// Throws Error(kManifestNotFound).
ShardManifest LoadManifest(const std::filesystem::path& dir);

// Yields samples in stored order. Each shard's digest is verified before
// any record from it is produced.
class ShardReader {
 public:
  explicit ShardReader(std::filesystem::path dir);
  ShardReader(std::filesystem::path dir, ShardManifest manifest);

  // Throws Error(kDigestMismatch), Error(kMissingBlob).
  std::optional<InterleavedSample> Next();
  void Rewind();
  const ShardManifest& manifest() const { return manifest_; }

 private:
  void OpenShard(std::size_t index);
  InterleavedSample Decode(const std::string& line) const;
  Bytes LoadBlob(const std::string& digest) const;

  std::filesystem::path dir_;
  ShardManifest manifest_;
  std::size_t shard_ = 0;
  std::vector<std::string> lines_;
  std::size_t line_ = 0;
  bool opened_ = false;
};

std::vector<InterleavedSample> ReadAll(const std::filesystem::path& dir);

// ---- Training mix ----------------------------------------------------------

class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::optional<InterleavedSample> Next() = 0;
  virtual void Rewind() = 0;
};

class VectorSource : public SampleSource {
 public:
  explicit VectorSource(std::vector<InterleavedSample> samples) : samples_(std::move(samples)) {}
  std::optional<InterleavedSample> Next() override;
  void Rewind() override { pos_ = 0; }

 private:
  std::vector<InterleavedSample> samples_;
  std::size_t pos_ = 0;
};

class ShardSource : public SampleSource {
 public:
  explicit ShardSource(std::filesystem::path dir) : reader_(std::move(dir)) {}
  std::optional<InterleavedSample> Next() override { return reader_.Next(); }
  void Rewind() override { reader_.Rewind(); }

 private:
  ShardReader reader_;
};

struct MixSpec {
  std::vector<std::pair<std::string, double>> sources;  // (source_id, weight)
  std::uint64_t seed = 0;

  // Weights divided by their sum. Throws Error(kInvalidArgument) when empty,
  // non-positive, or non-finite.
  std::vector<double> NormalizedWeights() const;
  static MixSpec FromJson(const nlohmann::json& j);
  nlohmann::json ToJson() const;
};

class MixStream {
 public:
  // `sources` is keyed by source_id and must cover every id in the spec.
  // Throws Error(kEmptySource), Error(kInvalidArgument).
  MixStream(std::map<std::string, std::unique_ptr<SampleSource>> sources, MixSpec spec);

  // Index into spec.sources of the next draw, advancing the generator only.
  std::size_t DrawSource();
  std::pair<std::string, InterleavedSample> Next();

 private:
  MixSpec spec_;
  std::vector<double> cumulative_;
  std::vector<std::unique_ptr<SampleSource>> ordered_;
  Rng rng_;
};

}  // namespace forge::store
