// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <set>

#include "forge/digest.hpp"
#include "forge/error.hpp"

namespace forge::config {
using clients::ClientRole;
using clients::Json;

namespace {

[[noreturn]] void Fail(const std::string& message) { throw Error(ErrorCode::kConfigError, message); }

// Reads the keys of one JSON object and rejects whatever was not read.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) Fail(Where("") + " must be an object");
  }

  const Json* Get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void Read(const std::string& key, double& out) {
    if (const Json* v = Get(key)) {
      if (!v->is_number() || !std::isfinite(v->get<double>())) Fail(Where(key) + " must be a number");
      out = v->get<double>();
    }
  }
  void Read(const std::string& key, int& out) {
    if (const Json* v = Get(key)) {
      if (!v->is_number_integer() || v->get<std::int64_t>() < INT32_MIN ||
          v->get<std::int64_t>() > INT32_MAX) {
        Fail(Where(key) + " must be an integer");
      }
      out = v->get<int>();
    }
  }
  void Read(const std::string& key, std::uint64_t& out) {
    if (const Json* v = Get(key)) {
      if (!v->is_number_unsigned()) Fail(Where(key) + " must be a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void Read(const std::string& key, bool& out) {
    if (const Json* v = Get(key)) {
      if (!v->is_boolean()) Fail(Where(key) + " must be true or false");
      out = v->get<bool>();
    }
  }
  void Read(const std::string& key, std::string& out) {
    if (const Json* v = Get(key)) {
      if (!v->is_string()) Fail(Where(key) + " must be a string");
      out = v->get<std::string>();
    }
  }

  void Finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) Fail("unknown key " + Where(it.key()));
    }
  }

  std::string Where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void ReadEndpoint(Section& s, clients::ServiceEndpoint& ep) {
  std::string key = ep.api_key.value_or("");
  int timeout = static_cast<int>(ep.timeout.count());
  int backoff = static_cast<int>(ep.backoff_base.count());
  s.Read("url", ep.base_url);
  s.Read("key", key);
  s.Read("timeout_ms", timeout);
  s.Read("max_retries", ep.max_retries);
  s.Read("backoff_ms", backoff);
  s.Read("max_in_flight", ep.max_in_flight);
  s.Finish();
  if (!key.empty()) ep.api_key = key;
  ep.timeout = std::chrono::milliseconds(timeout);
  ep.backoff_base = std::chrono::milliseconds(backoff);
}

void ReadImage(Section& s, image::ImageEngineConfig& c) {
  s.Read("min_area_ratio", c.min_area_ratio);
  s.Read("max_area_ratio", c.max_area_ratio);
  s.Read("max_objects", c.max_objects);
  s.Read("min_objects", c.min_objects);
  s.Read("iou_dedupe_threshold", c.iou_dedupe_threshold);
  s.Read("llm_retry_limit", c.llm_retry_limit);
  s.Read("concurrent_objects", c.concurrent_objects);
  s.Finish();
}

void ReadVideo(Section& s, video::VideoEngineConfig& c) {
  s.Read("min_gap", c.min_gap);
  s.Read("max_gap", c.max_gap);
  s.Read("pairs_per_video", c.pairs_per_video);
  s.Read("max_objects", c.max_objects);
  s.Read("llm_retry_limit", c.llm_retry_limit);
  if (const Json* orb = s.Get("orb")) {
    Section o(*orb, s.Where("orb"));
    o.Read("max_keypoints", c.orb.max_keypoints);
    o.Read("fast_threshold", c.orb.fast_threshold);
    o.Read("descriptor_bits", c.orb.descriptor_bits);
    o.Read("match_ratio", c.orb.match_ratio);
    o.Read("static_similarity_threshold", c.orb.static_similarity_threshold);
    o.Finish();
  }
  s.Finish();
}

void ReadMix(Section& s, std::vector<MixSourceConfig>& out) {
  const Json* sources = s.Get("sources");
  s.Finish();
  if (!sources) return;
  if (!sources->is_array()) Fail(s.Where("sources") + " must be an array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < sources->size(); ++i) {
    Section e((*sources)[i], s.Where("sources") + "[" + std::to_string(i) + "]");
    MixSourceConfig m;
    std::string shards;
    e.Read("id", m.id);
    e.Read("weight", m.weight);
    e.Read("shards", shards);
    e.Finish();
    if (m.id.empty()) Fail(e.Where("id") + " is required");
    if (!(m.weight > 0)) Fail(e.Where("weight") + " must be > 0");
    if (shards.empty()) Fail(e.Where("shards") + " is required");
    if (!ids.insert(m.id).second) Fail("duplicate mix source '" + m.id + "'");
    m.shards = shards;
    out.push_back(std::move(m));
  }
}

template <typename Fn>
void Checked(const std::string& what, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    Fail(what + ": " + e.detail());
  }
}

}  // namespace

std::string EnvPrefix(ClientRole role) {
  std::string out = "FORGE_";
  for (char c : clients::RoleName(role)) {
    out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

EnvLookup ProcessEnv() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
}

RunConfig ResolveRunConfig(const Json& doc, const EnvLookup& env, const Overrides& overrides) {
  RunConfig rc;
  for (ClientRole role : clients::AllRoles()) {
    const std::string prefix = EnvPrefix(role);
    const auto url = env ? env(prefix + "_URL") : std::nullopt;
    const auto key = env ? env(prefix + "_KEY") : std::nullopt;
    if (url) rc.endpoints[role].base_url = *url;
    if (key) rc.endpoints[role].api_key = *key;
  }

  const Json root = doc.is_null() ? Json::object() : doc;
  Section top(root, "");
  top.Read("seed", rc.seed);
  top.Read("workers", rc.workers);
  if (const Json* eps = top.Get("endpoints")) {
    if (!eps->is_object()) Fail("endpoints must be an object");
    for (auto it = eps->begin(); it != eps->end(); ++it) {
      const auto role = clients::ParseRole(it.key());
      if (!role) Fail("unknown key endpoints." + it.key());
      Section s(*it, "endpoints." + it.key());
      ReadEndpoint(s, rc.endpoints[*role]);
    }
  }
  if (const Json* j = top.Get("image")) {
    Section s(*j, "image");
    ReadImage(s, rc.image);
  }
  if (const Json* j = top.Get("video")) {
    Section s(*j, "video");
    ReadVideo(s, rc.video);
  }
  if (const Json* j = top.Get("bench")) {
    Section s(*j, "bench");
    s.Read("compatibility_attempts", rc.bench.compatibility_attempts);
    s.Read("llm_retry_limit", rc.bench.llm_retry_limit);
    s.Finish();
  }
  if (const Json* j = top.Get("guidance")) {
    Section s(*j, "guidance");
    s.Read("s1", rc.guidance.s1);
    s.Read("s2", rc.guidance.s2);
    s.Read("shift", rc.guidance.shift);
    s.Read("num_steps", rc.guidance.num_steps);
    s.Finish();
  }
  if (const Json* j = top.Get("mix")) {
    Section s(*j, "mix");
    ReadMix(s, rc.mix);
  }
  top.Finish();

  if (overrides.seed) rc.seed = *overrides.seed;
  if (overrides.workers) rc.workers = *overrides.workers;
  for (const auto& [role, url] : overrides.endpoint_urls) rc.endpoints[role].base_url = url;

  rc.image.rng_seed = rc.seed;
  rc.video.rng_seed = rc.seed;
  if (rc.workers < 1 || rc.workers > 256) Fail("workers must be in [1, 256]");
  for (const auto& [role, ep] : rc.endpoints) {
    Checked("endpoints." + std::string(clients::RoleName(role)), [&] { ep.Validate(); });
  }
  Checked("image", [&] { rc.image.Validate(); });
  Checked("video", [&] { rc.video.Validate(); });
  Checked("guidance", [&] { rc.guidance.Validate(); });
  if (rc.bench.compatibility_attempts < 1) Fail("bench.compatibility_attempts must be >= 1");
  if (rc.bench.llm_retry_limit < 1) Fail("bench.llm_retry_limit must be >= 1");
  return rc;
}

RunConfig LoadRunConfig(const std::optional<std::filesystem::path>& file, const EnvLookup& env,
                        const Overrides& overrides) {
  Json doc;
  if (file) {
    std::string text;
    try {
      const Bytes bytes = ReadFileBytes(file->string());
      text.assign(bytes.begin(), bytes.end());
    } catch (const Error& e) {
      Fail("cannot read " + file->string() + ": " + e.detail());
    }
    try {
      doc = Json::parse(text);
    } catch (const Json::exception& e) {
      Fail(file->string() + ": " + e.what());
    }
  }
  return ResolveRunConfig(doc, env, overrides);
}

Json RunConfig::Redacted() const {
  Json eps = Json::object();
  for (const auto& [role, ep] : endpoints) {
    Json e = {{"url", ep.base_url},
              {"timeout_ms", ep.timeout.count()},
              {"max_retries", ep.max_retries},
              {"backoff_ms", ep.backoff_base.count()},
              {"max_in_flight", ep.max_in_flight}};
    if (ep.api_key) e["key"] = "***";
    eps[std::string(clients::RoleName(role))] = e;
  }
  Json image_json = image.ToJson();
  image_json.erase("rng_seed");
  image_json["concurrent_objects"] = image.concurrent_objects;
  Json video_json = video.ToJson();
  video_json.erase("rng_seed");
  Json mix_json = Json::array();
  for (const auto& m : mix) {
    mix_json.push_back({{"id", m.id}, {"weight", m.weight}, {"shards", m.shards.string()}});
  }
  return {{"seed", seed},
          {"workers", workers},
          {"endpoints", eps},
          {"image", image_json},
          {"video", video_json},
          {"bench",
           {{"compatibility_attempts", bench.compatibility_attempts},
            {"llm_retry_limit", bench.llm_retry_limit}}},
          {"guidance",
           {{"s1", guidance.s1},
            {"s2", guidance.s2},
            {"shift", guidance.shift},
            {"num_steps", guidance.num_steps}}},
          {"mix", {{"sources", mix_json}}}};
}

}  // namespace forge::config
