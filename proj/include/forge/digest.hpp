// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace forge {

using Bytes = std::vector<std::uint8_t>;

// Lowercase hex SHA-256.
std::string Sha256Hex(std::span<const std::uint8_t> data);
std::string Sha256Hex(std::string_view data);

std::string Base64Encode(std::span<const std::uint8_t> data);
// Throws Error(kDecodeFailure) on malformed input.
Bytes Base64Decode(std::string_view text);

Bytes ReadFileBytes(const std::string& path);
// Writes to a temporary sibling and renames over `path`.
void WriteFileAtomic(const std::string& path, std::span<const std::uint8_t> data);
void WriteFileAtomic(const std::string& path, std::string_view data);

}  // namespace forge
