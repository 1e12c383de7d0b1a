// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

// The forge command line.
//
//   forge image  --corpus DIR|LIST --out DIR
//   forge video  --videos DIR --out DIR
//   forge bench curate        --pool DIR --queue DIR [--count N]
//   forge bench review-serve  --queue DIR [--host H] [--port P]
//   forge bench eval          --queue DIR --generated DIR [--questions FILE] [--out FILE]
//   forge bench report        --records FILE [--out FILE]
//   forge mix    [--source ID=WEIGHT=DIR ...] [--draws N] [--out FILE]
//   forge guide demo [--s1 X] [--s2 X] [--shift X] [--steps N]
//
// Shared flags: --config FILE, --seed N, --workers N, --mock TRANSCRIPT,
// --endpoint ROLE=URL, --dry-run. Exit codes: 0 success, 1 operational
// failure, 2 usage or configuration error. Logs go to the error stream as
// one JSON object per line; data goes to the output stream or --out.

#pragma once

#include <atomic>
#include <ostream>
#include <string>
#include <vector>

#include "forge/config.hpp"

namespace forge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Raised by the interrupt handler. Pipelines finish the items in flight,
// commit what is done and return.
std::atomic<bool>& StopFlag();

// args[0] is the program name.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const config::EnvLookup& env = config::ProcessEnv());

}  // namespace forge::cli
