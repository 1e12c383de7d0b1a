// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/review_queue.hpp"

#include <ctime>
#include <fstream>

#include "forge/digest.hpp"
#include "forge/error.hpp"

namespace forge::bench {
namespace fs = std::filesystem;
using clients::Json;

namespace {

constexpr const char kCasesFile[] = "cases.ndjson";
constexpr const char kDecisionsFile[] = "decisions.ndjson";

template <typename Fn>
void ForEachLine(const fs::path& file, Fn&& fn) {
  std::ifstream in(file);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      fn(Json::parse(line));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kDecodeFailure,
                  file.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

}  // namespace

std::string FormatTimestamp(std::chrono::system_clock::time_point t) {
  const std::time_t secs = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ReviewQueue::ReviewQueue(fs::path dir) : ReviewQueue(std::move(dir), Options{}) {}

ReviewQueue::ReviewQueue(fs::path dir, Options options)
    : dir_(std::move(dir)), options_(std::move(options)) {
  fs::create_directories(dir_ / "blobs");
  Replay();
}

std::chrono::system_clock::time_point ReviewQueue::Now() const {
  return options_.clock ? options_.clock() : std::chrono::system_clock::now();
}

void ReviewQueue::Replay() {
  ForEachLine(dir_ / kCasesFile, [&](const Json& j) {
    BenchCase c = BenchCase::FromJson(j, [&](const std::string& d) { return LoadBlob(d); });
    c.review_state = ReviewState::kPending;
    c.reject_reason.clear();
    if (cases_.contains(c.case_id)) return;
    order_.push_back(c.case_id);
    cases_[c.case_id] = std::move(c);
  });
  ForEachLine(dir_ / kDecisionsFile, [&](const Json& j) {
    auto it = cases_.find(j.at("case_id").get<std::string>());
    if (it == cases_.end() || it->second.review_state != ReviewState::kPending) return;
    Apply(it->second, {j.at("decision").get<std::string>() == "accepted", j.value("reason", "")});
  });
}

void ReviewQueue::AppendLine(const fs::path& file, const std::string& line) {
  std::ofstream out(file, std::ios::app | std::ios::binary);
  out << line << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot append to " + file.string());
}

void ReviewQueue::Apply(BenchCase& c, const ReviewDecision& d) {
  c.review_state = d.accepted ? ReviewState::kAccepted : ReviewState::kRejected;
  c.reject_reason = d.accepted ? "" : d.reason;
}

void ReviewQueue::AddCase(const BenchCase& c) {
  std::lock_guard<std::mutex> lock(mu_);
  if (cases_.contains(c.case_id)) return;
  for (const VisualAsset& r : c.references) {
    const fs::path blob = dir_ / "blobs" / (Sha256Hex(r.image_bytes) + ".png");
    if (!fs::exists(blob)) WriteFileAtomic(blob.string(), r.image_bytes);
  }
  BenchCase pending = c;
  pending.review_state = ReviewState::kPending;
  pending.reject_reason.clear();
  AppendLine(dir_ / kCasesFile, pending.ToJson().dump());
  order_.push_back(c.case_id);
  cases_[c.case_id] = std::move(pending);
}

std::optional<BenchCase> ReviewQueue::Next(const std::string& reviewer) {
  if (reviewer.empty()) throw Error(ErrorCode::kInvalidArgument, "reviewer is required");
  std::lock_guard<std::mutex> lock(mu_);
  const auto now = Now();
  for (auto& [id, lease] : leases_) {
    if (lease.reviewer == reviewer && lease.expires > now &&
        cases_.at(id).review_state == ReviewState::kPending) {
      lease.expires = now + options_.lease;
      return cases_.at(id);
    }
  }
  for (const std::string& id : order_) {
    const BenchCase& c = cases_.at(id);
    if (c.review_state != ReviewState::kPending) continue;
    auto it = leases_.find(id);
    if (it != leases_.end() && it->second.expires > now && it->second.reviewer != reviewer) continue;
    leases_[id] = {reviewer, now + options_.lease};
    return c;
  }
  return std::nullopt;
}

BenchCase ReviewQueue::Decide(const std::string& case_id, const ReviewDecision& decision,
                              const std::string& reviewer) {
  if (reviewer.empty()) throw Error(ErrorCode::kInvalidArgument, "reviewer is required");
  if (!decision.accepted && decision.reason.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "a rejection needs a reason");
  }
  std::lock_guard<std::mutex> lock(mu_);
  auto it = cases_.find(case_id);
  if (it == cases_.end()) throw Error(ErrorCode::kUnknownCase, case_id);
  BenchCase& c = it->second;
  if (c.review_state != ReviewState::kPending) {
    throw Error(ErrorCode::kAlreadyDecided,
                case_id + " is already " + std::string(ReviewStateName(c.review_state)));
  }
  auto lease = leases_.find(case_id);
  if (lease != leases_.end() && lease->second.expires > Now() && lease->second.reviewer != reviewer) {
    throw Error(ErrorCode::kLeaseConflict, case_id + " is leased to " + lease->second.reviewer);
  }
  Json line = {{"case_id", case_id},
               {"decision", decision.accepted ? "accepted" : "rejected"},
               {"reviewer", reviewer},
               {"timestamp", FormatTimestamp(Now())}};
  if (!decision.accepted) line["reason"] = decision.reason;
  AppendLine(dir_ / kDecisionsFile, line.dump());
  Apply(c, decision);
  if (lease != leases_.end()) leases_.erase(lease);
  return c;
}

ReviewStats ReviewQueue::Stats() const {
  std::lock_guard<std::mutex> lock(mu_);
  ReviewStats s;
  for (const auto& [id, c] : cases_) {
    switch (c.review_state) {
      case ReviewState::kPending: ++s.pending; break;
      case ReviewState::kAccepted: ++s.accepted; break;
      case ReviewState::kRejected: ++s.rejected; break;
    }
  }
  return s;
}

std::optional<BenchCase> ReviewQueue::Find(const std::string& case_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = cases_.find(case_id);
  if (it == cases_.end()) return std::nullopt;
  return it->second;
}

std::vector<BenchCase> ReviewQueue::Accepted() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<BenchCase> out;
  for (const std::string& id : order_) {
    if (cases_.at(id).review_state == ReviewState::kAccepted) out.push_back(cases_.at(id));
  }
  return out;
}

std::vector<BenchCase> ReviewQueue::All() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<BenchCase> out;
  for (const std::string& id : order_) out.push_back(cases_.at(id));
  return out;
}

Bytes ReviewQueue::LoadBlob(const std::string& digest) const {
  const bool hex = digest.size() == 64 &&
                   digest.find_first_not_of("0123456789abcdef") == std::string::npos;
  const fs::path blob = dir_ / "blobs" / (digest + ".png");
  if (!hex || !fs::is_regular_file(blob)) throw Error(ErrorCode::kMissingBlob, digest);
  Bytes bytes = ReadFileBytes(blob.string());
  if (Sha256Hex(bytes) != digest) throw Error(ErrorCode::kDigestMismatch, digest);
  return bytes;
}

}  // namespace forge::bench
