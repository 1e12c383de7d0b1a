// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Human verification of curated benchmark cases. Cases and decisions are
// append-only NDJSON logs in one directory, replayed on open; reference
// images are stored content-addressed next to them. Each pending case is
// leased to one reviewer at a time and can be decided exactly once.

#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "forge/benchmark.hpp"

namespace forge::bench {

struct ReviewDecision {
  bool accepted = false;
  std::string reason;  // required when rejecting
};

struct ReviewStats {
  std::size_t pending = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  friend bool operator==(const ReviewStats&, const ReviewStats&) = default;
};

class ReviewQueue {
 public:
  using Clock = std::function<std::chrono::system_clock::time_point()>;

  struct Options {
    std::chrono::seconds lease{600};
    Clock clock;  // defaults to system_clock::now
  };

  // <dir>/cases.ndjson, <dir>/decisions.ndjson, <dir>/blobs/<sha256>.png.
  explicit ReviewQueue(std::filesystem::path dir);
  ReviewQueue(std::filesystem::path dir, Options options);

  // Adds a pending case. Re-adding a known case_id is a no-op.
  void AddCase(const BenchCase& c);

  // The reviewer's current lease if any, else the oldest pending case not
  // leased to someone else, leased to `reviewer` until now + lease.
  std::optional<BenchCase> Next(const std::string& reviewer);

  // Throws Error(kUnknownCase), Error(kAlreadyDecided), Error(kLeaseConflict)
  // when another reviewer holds a live lease, Error(kInvalidArgument) for a
  // rejection without a reason or an empty reviewer.
  BenchCase Decide(const std::string& case_id, const ReviewDecision& decision,
                   const std::string& reviewer);

  ReviewStats Stats() const;
  std::optional<BenchCase> Find(const std::string& case_id) const;
  // Accepted cases in insertion order.
  std::vector<BenchCase> Accepted() const;
  std::vector<BenchCase> All() const;

  // Throws Error(kMissingBlob).
  Bytes LoadBlob(const std::string& digest) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  struct Lease {
    std::string reviewer;
    std::chrono::system_clock::time_point expires;
  };

  void Replay();
  void AppendLine(const std::filesystem::path& file, const std::string& line);
  void Apply(BenchCase& c, const ReviewDecision& d);
  std::chrono::system_clock::time_point Now() const;

  std::filesystem::path dir_;
  Options options_;
  mutable std::mutex mu_;
  std::vector<std::string> order_;
  std::map<std::string, BenchCase> cases_;
  std::map<std::string, Lease> leases_;
};

// ISO-8601 UTC with seconds, e.g. 2026-01-02T03:04:05Z.
std::string FormatTimestamp(std::chrono::system_clock::time_point t);

}  // namespace forge::bench
