// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Model-service clients. Every role speaks JSON over HTTP POST with a fixed
// request/response schema. Calls retry transient failures (network errors,
// timeouts, 429, 5xx) with full-jitter exponential backoff and are gated by
// a per-endpoint in-flight budget. A transcript-backed mock transport makes
// every pipeline runnable offline and byte-reproducible.

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/rng.hpp"

namespace forge::clients {

using Json = nlohmann::json;

enum class ClientRole {
  kCaptioner,
  kDetector,
  kSegmenter,
  kRegionDescriber,
  kInstructionWriter,
  kCorrespondenceVlm,
  kChangeVerifier,
  kJudge,
  kQaAnswerer,
  kQuestionWriter,
};

std::string_view RoleName(ClientRole role);
std::optional<ClientRole> ParseRole(std::string_view name);
const std::vector<ClientRole>& AllRoles();

struct ServiceEndpoint {
  std::string base_url;
  std::optional<std::string> api_key;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{250};
  int max_in_flight = 8;

  static constexpr int kMaxRetriesLimit = 8;
  // Throws Error(kConfigError).
  void Validate() const;
};

// Throw Error(kSchemaViolation) naming the offending field.
void ValidateRequest(ClientRole role, const Json& request);
void ValidateResponse(ClientRole role, const Json& response);

struct TransportResult {
  enum class Kind { kOk, kNetworkError, kTimeout };
  Kind kind = Kind::kOk;
  int status = 0;
  std::string body;
  std::string error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportResult Post(ClientRole role, const ServiceEndpoint& endpoint,
                               const std::string& body) = 0;
};

// Live HTTP(S) POST of the JSON body to endpoint.base_url, bearer auth.
class HttpTransport : public Transport {
 public:
  TransportResult Post(ClientRole role, const ServiceEndpoint& endpoint,
                       const std::string& body) override;
};

// Canned responses keyed by the digest of (role, request).
struct MockTranscript {
  enum class DefaultPolicy { kError, kEcho };

  std::map<std::string, Json> entries;  // digest -> response
  std::map<std::string, std::string> roles;  // digest -> role name, informational
  DefaultPolicy default_policy = DefaultPolicy::kError;

  static std::string RequestDigest(ClientRole role, const Json& request);
  void Add(ClientRole role, const Json& request, Json response);
  const Json* Lookup(const std::string& digest) const;

  Json ToJson() const;
  static MockTranscript FromJson(const Json& doc);
  static MockTranscript Load(const std::string& path);
  void Save(const std::string& path) const;
};

// Serves responses from a transcript. Missing digests throw
// Error(kUnknownRequest) under DefaultPolicy::kError; kEcho returns the
// request body unchanged.
class MockTransport : public Transport {
 public:
  explicit MockTransport(MockTranscript transcript) : transcript_(std::move(transcript)) {}
  TransportResult Post(ClientRole role, const ServiceEndpoint& endpoint,
                       const std::string& body) override;
  const MockTranscript& transcript() const { return transcript_; }

 private:
  MockTranscript transcript_;
};

using Responder = std::function<Json(ClientRole role, const Json& request)>;

// Answers with `responder` and records every exchange into a transcript,
// so a synthetic or live session can be replayed through MockTransport.
class RecordingTransport : public Transport {
 public:
  explicit RecordingTransport(Responder responder) : responder_(std::move(responder)) {}
  TransportResult Post(ClientRole role, const ServiceEndpoint& endpoint,
                       const std::string& body) override;
  MockTranscript transcript() const;

 private:
  Responder responder_;
  mutable std::mutex mu_;
  MockTranscript transcript_;
};

class Semaphore {
 public:
  explicit Semaphore(int budget) : available_(budget) {}
  void Acquire();
  void Release();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int available_;
};

struct RoleMetrics {
  std::atomic<std::int64_t> calls{0};
  std::atomic<std::int64_t> attempts{0};
  std::atomic<std::int64_t> failures{0};
};

struct CallResult {
  Json response;
  int attempts = 0;
};

struct ClientOptions {
  std::uint64_t jitter_seed = 0;
  // Replaced in tests to avoid real sleeping.
  std::function<void(std::chrono::milliseconds)> sleep;
  // Invoked after every attempt with the 1-based attempt number.
  std::function<void(ClientRole, int, const TransportResult&)> on_attempt;
};

// The set of role clients one pipeline run uses. Shareable across threads.
class Clients {
 public:
  Clients(std::map<ClientRole, ServiceEndpoint> endpoints,
          std::shared_ptr<Transport> transport, ClientOptions options = {});

  // Offline bundle: every role served by `transport` at a mock:// endpoint.
  static Clients Mock(std::shared_ptr<Transport> transport, ClientOptions options = {});

  // Throws SchemaViolation, NonRetriable, Exhausted, Timeout, or whatever
  // the transport throws (e.g. UnknownRequest from a mock).
  CallResult Call(ClientRole role, const Json& request);
  Json Request(ClientRole role, const Json& request) { return Call(role, request).response; }

  bool Has(ClientRole role) const { return endpoints_.contains(role); }
  const ServiceEndpoint& endpoint(ClientRole role) const;
  const RoleMetrics& metrics(ClientRole role) const;

 private:
  std::chrono::milliseconds NextDelay(const ServiceEndpoint& ep, int attempt);

  std::map<ClientRole, ServiceEndpoint> endpoints_;
  std::shared_ptr<Transport> transport_;
  ClientOptions options_;
  std::map<std::string, std::shared_ptr<Semaphore>> gates_;  // by base_url
  std::map<ClientRole, std::unique_ptr<RoleMetrics>> metrics_;
  std::mutex rng_mu_;
  Rng jitter_;
};

}  // namespace forge::clients
