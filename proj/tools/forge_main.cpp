// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <csignal>
#include <iostream>

#include "forge/cli.hpp"

namespace {

void OnInterrupt(int) {
  forge::cli::StopFlag().store(true);
  // A second interrupt terminates immediately.
  std::signal(SIGINT, SIG_DFL);
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, OnInterrupt);
  std::signal(SIGTERM, OnInterrupt);
  return forge::cli::Run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
