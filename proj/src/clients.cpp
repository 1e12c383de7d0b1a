// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/clients.hpp"

#include <httplib.h>

#include <fstream>
#include <thread>

#include "forge/digest.hpp"
#include "forge/error.hpp"

namespace forge::clients {
namespace {

[[noreturn]] void Violation(ClientRole role, const std::string& what) {
  throw Error(ErrorCode::kSchemaViolation, std::string(RoleName(role)) + ": " + what);
}

void RequireObject(ClientRole role, const Json& j, const char* what) {
  if (!j.is_object()) Violation(role, std::string(what) + " is not an object");
}

const Json& Field(ClientRole role, const Json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) Violation(role, std::string("missing field '") + name + "'");
  return *it;
}

void RequireString(ClientRole role, const Json& j, const char* name) {
  if (!Field(role, j, name).is_string()) {
    Violation(role, std::string("field '") + name + "' must be a string");
  }
}

void RequireBool(ClientRole role, const Json& j, const char* name) {
  if (!Field(role, j, name).is_boolean()) {
    Violation(role, std::string("field '") + name + "' must be a boolean");
  }
}

void RequireInteger(ClientRole role, const Json& j, const char* name) {
  if (!Field(role, j, name).is_number_integer()) {
    Violation(role, std::string("field '") + name + "' must be an integer");
  }
}

const Json& RequireArray(ClientRole role, const Json& j, const char* name) {
  const Json& a = Field(role, j, name);
  if (!a.is_array()) Violation(role, std::string("field '") + name + "' must be an array");
  return a;
}

void RequireBox(ClientRole role, const Json& j, const char* name) {
  const Json& a = RequireArray(role, j, name);
  if (a.size() != 4) Violation(role, std::string("field '") + name + "' must have 4 entries");
  for (const Json& v : a) {
    if (!v.is_number()) Violation(role, std::string("field '") + name + "' must be numeric");
  }
}

void OptionalString(ClientRole role, const Json& j, const char* name) {
  if (j.contains(name) && !j[name].is_string()) {
    Violation(role, std::string("field '") + name + "' must be a string");
  }
}

bool IsTransientStatus(int status) { return status == 429 || status >= 500; }

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl SplitUrl(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kConfigError, "endpoint url lacks a scheme: " + url);
  }
  const auto path_begin = url.find('/', scheme_end + 3);
  if (path_begin == std::string::npos) return {url, "/"};
  return {url.substr(0, path_begin), url.substr(path_begin)};
}

}  // namespace

std::string_view RoleName(ClientRole role) {
  switch (role) {
    case ClientRole::kCaptioner: return "captioner";
    case ClientRole::kDetector: return "detector";
    case ClientRole::kSegmenter: return "segmenter";
    case ClientRole::kRegionDescriber: return "region_describer";
    case ClientRole::kInstructionWriter: return "instruction_writer";
    case ClientRole::kCorrespondenceVlm: return "correspondence_vlm";
    case ClientRole::kChangeVerifier: return "change_verifier";
    case ClientRole::kJudge: return "judge";
    case ClientRole::kQaAnswerer: return "qa_answerer";
    case ClientRole::kQuestionWriter: return "question_writer";
  }
  return "unknown";
}

const std::vector<ClientRole>& AllRoles() {
  static const std::vector<ClientRole> kRoles = {
      ClientRole::kCaptioner,         ClientRole::kDetector,
      ClientRole::kSegmenter,         ClientRole::kRegionDescriber,
      ClientRole::kInstructionWriter, ClientRole::kCorrespondenceVlm,
      ClientRole::kChangeVerifier,    ClientRole::kJudge,
      ClientRole::kQaAnswerer,        ClientRole::kQuestionWriter,
  };
  return kRoles;
}

std::optional<ClientRole> ParseRole(std::string_view name) {
  for (ClientRole r : AllRoles()) {
    if (RoleName(r) == name) return r;
  }
  return std::nullopt;
}

void ServiceEndpoint::Validate() const {
  if (base_url.empty()) throw Error(ErrorCode::kConfigError, "endpoint base_url is empty");
  if (timeout.count() <= 0) throw Error(ErrorCode::kConfigError, "timeout must be > 0");
  if (max_retries < 0 || max_retries > kMaxRetriesLimit) {
    throw Error(ErrorCode::kConfigError, "max_retries must be in [0, 8]");
  }
  if (backoff_base.count() < 0) {
    throw Error(ErrorCode::kConfigError, "backoff_base must be >= 0");
  }
  if (max_in_flight < 1) throw Error(ErrorCode::kConfigError, "max_in_flight must be >= 1");
}

void ValidateRequest(ClientRole role, const Json& r) {
  RequireObject(role, r, "request");
  switch (role) {
    case ClientRole::kCaptioner:
    case ClientRole::kDetector:
      RequireString(role, r, "image_b64");
      break;
    case ClientRole::kSegmenter:
      RequireString(role, r, "image_b64");
      RequireBox(role, r, "bbox");
      break;
    case ClientRole::kRegionDescriber:
      RequireString(role, r, "image_b64");
      RequireString(role, r, "mask_rle");
      break;
    case ClientRole::kInstructionWriter:
      RequireString(role, r, "global_caption");
      for (const Json& o : RequireArray(role, r, "objects")) {
        RequireObject(role, o, "objects[]");
        RequireString(role, o, "label");
        RequireString(role, o, "caption");
      }
      OptionalString(role, r, "feedback");
      break;
    case ClientRole::kCorrespondenceVlm:
      RequireString(role, r, "image_b64");
      RequireString(role, r, "prompt");
      break;
    case ClientRole::kChangeVerifier:
      RequireString(role, r, "image_a_b64");
      RequireString(role, r, "image_b_b64");
      break;
    case ClientRole::kJudge:
      RequireString(role, r, "generated_b64");
      for (const Json& ref : RequireArray(role, r, "references")) {
        if (!ref.is_string()) Violation(role, "references[] must be strings");
      }
      RequireString(role, r, "instruction");
      break;
    case ClientRole::kQaAnswerer:
      RequireString(role, r, "image_b64");
      RequireString(role, r, "question");
      break;
    case ClientRole::kQuestionWriter:
      RequireString(role, r, "instruction");
      for (const Json& p : RequireArray(role, r, "phrases")) {
        RequireObject(role, p, "phrases[]");
        RequireString(role, p, "phrase");
        RequireInteger(role, p, "index");
      }
      break;
  }
}

void ValidateResponse(ClientRole role, const Json& r) {
  RequireObject(role, r, "response");
  switch (role) {
    case ClientRole::kCaptioner:
    case ClientRole::kRegionDescriber:
      RequireString(role, r, "caption");
      break;
    case ClientRole::kDetector:
      for (const Json& d : RequireArray(role, r, "detections")) {
        RequireObject(role, d, "detections[]");
        RequireString(role, d, "label");
        RequireBox(role, d, "bbox");
        if (d.contains("score") && !d["score"].is_number()) {
          Violation(role, "detections[].score must be numeric");
        }
      }
      break;
    case ClientRole::kSegmenter:
      RequireString(role, r, "mask_rle");
      break;
    case ClientRole::kInstructionWriter:
      RequireString(role, r, "interleaved_caption");
      for (const Json& m : RequireArray(role, r, "mapping")) {
        RequireObject(role, m, "mapping[]");
        RequireString(role, m, "phrase");
        RequireInteger(role, m, "index");
      }
      break;
    case ClientRole::kCorrespondenceVlm:
      for (const Json& m : RequireArray(role, r, "matches")) {
        RequireObject(role, m, "matches[]");
        RequireString(role, m, "label");
        RequireBox(role, m, "bbox_left");
        RequireBox(role, m, "bbox_right");
      }
      break;
    case ClientRole::kChangeVerifier:
      RequireBool(role, r, "changed");
      RequireString(role, r, "reason");
      break;
    case ClientRole::kJudge:
      RequireInteger(role, r, "rating");
      RequireString(role, r, "rationale");
      break;
    case ClientRole::kQaAnswerer:
      RequireString(role, r, "answer");
      break;
    case ClientRole::kQuestionWriter:
      for (const Json& q : RequireArray(role, r, "questions")) {
        RequireObject(role, q, "questions[]");
        RequireString(role, q, "text");
        RequireString(role, q, "kind");
        if (q.contains("index") && !q["index"].is_number_integer()) {
          Violation(role, "questions[].index must be an integer");
        }
      }
      break;
  }
}

TransportResult HttpTransport::Post(ClientRole role, const ServiceEndpoint& endpoint,
                                    const std::string& body) {
  (void)role;
  const ParsedUrl url = SplitUrl(endpoint.base_url);
  httplib::Client cli(url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
  const auto usecs =
      std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (endpoint.api_key) headers.emplace("Authorization", "Bearer " + *endpoint.api_key);
  auto res = cli.Post(url.path, headers, body, "application/json");
  TransportResult out;
  if (!res) {
    const httplib::Error err = res.error();
    out.kind = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                   ? TransportResult::Kind::kTimeout
                   : TransportResult::Kind::kNetworkError;
    out.error = httplib::to_string(err);
    return out;
  }
  out.status = res->status;
  out.body = res->body;
  return out;
}

std::string MockTranscript::RequestDigest(ClientRole role, const Json& request) {
  const Json keyed = {{"role", RoleName(role)}, {"request", request}};
  return Sha256Hex(keyed.dump());
}

void MockTranscript::Add(ClientRole role, const Json& request, Json response) {
  const std::string digest = RequestDigest(role, request);
  entries[digest] = std::move(response);
  roles[digest] = std::string(RoleName(role));
}

const Json* MockTranscript::Lookup(const std::string& digest) const {
  auto it = entries.find(digest);
  return it == entries.end() ? nullptr : &it->second;
}

Json MockTranscript::ToJson() const {
  Json list = Json::array();
  for (const auto& [digest, response] : entries) {
    Json e = {{"digest", digest}, {"response", response}};
    if (auto it = roles.find(digest); it != roles.end()) e["role"] = it->second;
    list.push_back(std::move(e));
  }
  return {{"default_policy", default_policy == DefaultPolicy::kEcho ? "echo" : "error"},
          {"entries", std::move(list)}};
}

MockTranscript MockTranscript::FromJson(const Json& doc) {
  MockTranscript t;
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array()) {
    throw Error(ErrorCode::kConfigError, "transcript must be an object with 'entries'");
  }
  const std::string policy = doc.value("default_policy", "error");
  if (policy == "echo") {
    t.default_policy = DefaultPolicy::kEcho;
  } else if (policy != "error") {
    throw Error(ErrorCode::kConfigError, "unknown default_policy " + policy);
  }
  for (const Json& e : doc["entries"]) {
    if (!e.contains("digest") || !e["digest"].is_string() || !e.contains("response")) {
      throw Error(ErrorCode::kConfigError, "transcript entry needs digest and response");
    }
    const std::string digest = e["digest"].get<std::string>();
    t.entries[digest] = e["response"];
    if (e.contains("role") && e["role"].is_string()) t.roles[digest] = e["role"];
  }
  return t;
}

MockTranscript MockTranscript::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open transcript " + path);
  Json doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::kConfigError, "transcript is not JSON: " + path);
  return FromJson(doc);
}

void MockTranscript::Save(const std::string& path) const {
  WriteFileAtomic(path, ToJson().dump(1) + "\n");
}

TransportResult MockTransport::Post(ClientRole role, const ServiceEndpoint& endpoint,
                                    const std::string& body) {
  (void)endpoint;
  const Json request = Json::parse(body);
  const std::string digest = MockTranscript::RequestDigest(role, request);
  TransportResult out;
  out.status = 200;
  if (const Json* hit = transcript_.Lookup(digest)) {
    out.body = hit->dump();
    return out;
  }
  if (transcript_.default_policy == MockTranscript::DefaultPolicy::kEcho) {
    out.body = body;
    return out;
  }
  throw Error(ErrorCode::kUnknownRequest, std::string(RoleName(role)) +
                                              " request " + digest.substr(0, 16) +
                                              " is not in the transcript");
}

TransportResult RecordingTransport::Post(ClientRole role, const ServiceEndpoint& endpoint,
                                         const std::string& body) {
  (void)endpoint;
  const Json request = Json::parse(body);
  Json response = responder_(role, request);
  TransportResult out;
  out.status = 200;
  out.body = response.dump();
  std::lock_guard<std::mutex> lock(mu_);
  transcript_.Add(role, request, std::move(response));
  return out;
}

MockTranscript RecordingTransport::transcript() const {
  std::lock_guard<std::mutex> lock(mu_);
  return transcript_;
}

void Semaphore::Acquire() {
  std::unique_lock<std::mutex> lock(mu_);
  cv_.wait(lock, [this] { return available_ > 0; });
  --available_;
}

void Semaphore::Release() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    ++available_;
  }
  cv_.notify_one();
}

Clients::Clients(std::map<ClientRole, ServiceEndpoint> endpoints,
                 std::shared_ptr<Transport> transport, ClientOptions options)
    : endpoints_(std::move(endpoints)),
      transport_(std::move(transport)),
      options_(std::move(options)),
      jitter_(options_.jitter_seed) {
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
  for (const auto& [role, ep] : endpoints_) {
    ep.Validate();
    auto& gate = gates_[ep.base_url];
    if (!gate) gate = std::make_shared<Semaphore>(ep.max_in_flight);
    metrics_[role] = std::make_unique<RoleMetrics>();
  }
}

Clients Clients::Mock(std::shared_ptr<Transport> transport, ClientOptions options) {
  std::map<ClientRole, ServiceEndpoint> eps;
  for (ClientRole r : AllRoles()) {
    ServiceEndpoint ep;
    ep.base_url = "mock://" + std::string(RoleName(r));
    ep.backoff_base = std::chrono::milliseconds(0);
    eps[r] = ep;
  }
  return Clients(std::move(eps), std::move(transport), std::move(options));
}

const ServiceEndpoint& Clients::endpoint(ClientRole role) const {
  auto it = endpoints_.find(role);
  if (it == endpoints_.end()) {
    throw Error(ErrorCode::kConfigError,
                "no endpoint configured for " + std::string(RoleName(role)));
  }
  return it->second;
}

const RoleMetrics& Clients::metrics(ClientRole role) const {
  endpoint(role);
  return *metrics_.at(role);
}

std::chrono::milliseconds Clients::NextDelay(const ServiceEndpoint& ep, int attempt) {
  const double cap = static_cast<double>(ep.backoff_base.count()) *
                     static_cast<double>(1LL << attempt);
  std::lock_guard<std::mutex> lock(rng_mu_);
  return std::chrono::milliseconds(static_cast<long long>(jitter_.Uniform01() * cap));
}

CallResult Clients::Call(ClientRole role, const Json& request) {
  const ServiceEndpoint& ep = endpoint(role);
  ValidateRequest(role, request);
  RoleMetrics& m = *metrics_.at(role);
  ++m.calls;
  const std::string body = request.dump();
  Semaphore& gate = *gates_.at(ep.base_url);
  std::string last_failure;
  bool last_was_timeout = false;
  for (int attempt = 0; attempt <= ep.max_retries; ++attempt) {
    if (attempt > 0) options_.sleep(NextDelay(ep, attempt - 1));
    ++m.attempts;
    TransportResult res;
    gate.Acquire();
    try {
      res = transport_->Post(role, ep, body);
    } catch (...) {
      gate.Release();
      ++m.failures;
      throw;
    }
    gate.Release();
    if (options_.on_attempt) options_.on_attempt(role, attempt + 1, res);

    if (res.kind == TransportResult::Kind::kOk && res.status >= 200 && res.status < 300) {
      Json response = Json::parse(res.body, nullptr, false);
      if (response.is_discarded()) {
        ++m.failures;
        throw Error(ErrorCode::kSchemaViolation,
                    std::string(RoleName(role)) + ": response body is not JSON");
      }
      try {
        ValidateResponse(role, response);
      } catch (const Error&) {
        ++m.failures;
        throw;
      }
      return {std::move(response), attempt + 1};
    }
    ++m.failures;
    if (res.kind == TransportResult::Kind::kOk && !IsTransientStatus(res.status)) {
      throw Error(ErrorCode::kNonRetriable, std::string(RoleName(role)) + ": HTTP " +
                                                std::to_string(res.status) + " " +
                                                res.body.substr(0, 200));
    }
    last_was_timeout = res.kind == TransportResult::Kind::kTimeout;
    last_failure = res.kind == TransportResult::Kind::kOk
                       ? "HTTP " + std::to_string(res.status)
                       : res.error;
  }
  const std::string msg = std::string(RoleName(role)) + ": " +
                          std::to_string(ep.max_retries + 1) +
                          " attempts failed; last failure: " + last_failure;
  throw Error(last_was_timeout ? ErrorCode::kTimeout : ErrorCode::kExhausted, msg);
}

}  // namespace forge::clients
