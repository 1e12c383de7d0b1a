// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Regenerates the offline fixture sets under a directory (tests/fixtures by
// default).

#include <CLI11.hpp>
#include <iostream>

#include "forge/error.hpp"
#include "forge/fixtures.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Regenerate offline fixtures.", "forge_fixtures"};
  std::string root = "tests/fixtures";
  std::uint64_t seed = forge::fixtures::kDefaultSeed;
  app.add_option("--root", root, "Fixture root directory");
  app.add_option("--seed", seed, "Fixture seed");
  CLI11_PARSE(app, argc, argv);
  try {
    forge::fixtures::WriteImageFixture(root + "/image", {.scenes = 50, .seed = seed});
    forge::fixtures::WriteVideoFixture(root + "/video", {.seed = seed});
    forge::fixtures::WriteBenchFixture(root + "/bench", {.entities = 24, .cases = 12, .seed = seed});
  } catch (const forge::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  std::cout << "fixtures written under " << root << "\n";
  return 0;
}
