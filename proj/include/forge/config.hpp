// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Run configuration: one JSON file plus environment and flag overrides.
// Precedence is env < file < flags. Unknown keys anywhere are rejected.
//
//   {
//     "seed": 7, "workers": 4,
//     "endpoints": {"captioner": {"url": "...", "key": "...", "timeout_ms": 30000,
//                                 "max_retries": 3, "backoff_ms": 250, "max_in_flight": 8}},
//     "image": {...ImageEngineConfig...},
//     "video": {..., "orb": {...OrbConfig...}},
//     "bench": {"compatibility_attempts": 5, "llm_retry_limit": 3},
//     "guidance": {"s1": 4.0, "s2": 1.5, "shift": 3.0, "num_steps": 50},
//     "mix": {"sources": [{"id": "...", "weight": 0.2, "shards": "dir"}]}
//   }
//
// Environment: FORGE_<ROLE>_URL and FORGE_<ROLE>_KEY, e.g. FORGE_QA_ANSWERER_URL.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/benchmark.hpp"
#include "forge/clients.hpp"
#include "forge/guidance.hpp"
#include "forge/image_engine.hpp"
#include "forge/video_engine.hpp"

namespace forge::config {

struct MixSourceConfig {
  std::string id;
  double weight = 0;
  std::filesystem::path shards;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int workers = 4;
  std::map<clients::ClientRole, clients::ServiceEndpoint> endpoints;
  image::ImageEngineConfig image;
  video::VideoEngineConfig video;
  bench::CurateOptions bench;
  guidance::GuidanceConfig guidance;
  std::vector<MixSourceConfig> mix;

  // Effective configuration with API keys replaced by "***".
  clients::Json Redacted() const;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::map<clients::ClientRole, std::string> endpoint_urls;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;
EnvLookup ProcessEnv();

std::string EnvPrefix(clients::ClientRole role);

// Throws Error(kConfigError) for unreadable files, malformed JSON, unknown
// keys, wrong types, or values the module configs reject. The seed flows
// into every module's rng_seed.
RunConfig LoadRunConfig(const std::optional<std::filesystem::path>& file, const EnvLookup& env,
                        const Overrides& overrides);

// Same, from an already parsed document.
RunConfig ResolveRunConfig(const clients::Json& doc, const EnvLookup& env,
                           const Overrides& overrides);

}  // namespace forge::config
