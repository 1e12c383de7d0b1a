// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <unistd.h>

#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/rng.hpp"

namespace forge {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidUtf8: return "InvalidUtf8";
    case ErrorCode::kDuplicateIndex: return "DuplicateIndex";
    case ErrorCode::kNonContiguousIndices: return "NonContiguousIndices";
    case ErrorCode::kAdjacentSlots: return "AdjacentSlots";
    case ErrorCode::kMarkerInText: return "MarkerInText";
    case ErrorCode::kTokenizerFailure: return "TokenizerFailure";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kUnmappedSlot: return "UnmappedSlot";
    case ErrorCode::kInvalidMapping: return "InvalidMapping";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kExhausted: return "Exhausted";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kNonRetriable: return "NonRetriable";
    case ErrorCode::kUnknownRequest: return "UnknownRequest";
    case ErrorCode::kDecodeFailure: return "DecodeFailure";
    case ErrorCode::kAllDropped: return "AllDropped";
    case ErrorCode::kWeaveFailed: return "WeaveFailed";
    case ErrorCode::kSampleRejected: return "SampleRejected";
    case ErrorCode::kNoValidPairs: return "NoValidPairs";
    case ErrorCode::kIncompatibleSet: return "IncompatibleSet";
    case ErrorCode::kJudgeOutOfRange: return "JudgeOutOfRange";
    case ErrorCode::kFormulationFailed: return "FormulationFailed";
    case ErrorCode::kAnswerUnparseable: return "AnswerUnparseable";
    case ErrorCode::kAlreadyDecided: return "AlreadyDecided";
    case ErrorCode::kUnknownCase: return "UnknownCase";
    case ErrorCode::kLeaseConflict: return "LeaseConflict";
    case ErrorCode::kNotAccepted: return "NotAccepted";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kInvalidSample: return "InvalidSample";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kDigestMismatch: return "DigestMismatch";
    case ErrorCode::kMissingBlob: return "MissingBlob";
    case ErrorCode::kManifestNotFound: return "ManifestNotFound";
    case ErrorCode::kEmptySource: return "EmptySource";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

std::vector<std::size_t> Rng::SampleIndices(std::size_t n, std::size_t k) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  if (k > n) k = n;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(Below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::uint64_t DeriveSeed(std::uint64_t parent, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ parent;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // splitmix64 finalizer
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

std::string Sha256Hex(std::span<const std::uint8_t> data) {
  unsigned char md[SHA256_DIGEST_LENGTH];
  SHA256(data.data(), data.size(), md);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(2 * SHA256_DIGEST_LENGTH, '0');
  for (int i = 0; i < SHA256_DIGEST_LENGTH; ++i) {
    out[2 * i] = kHex[md[i] >> 4];
    out[2 * i + 1] = kHex[md[i] & 0xf];
  }
  return out;
}

std::string Sha256Hex(std::string_view data) {
  return Sha256Hex(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

std::string Base64Encode(std::span<const std::uint8_t> data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                data.data(), static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes Base64Decode(std::string_view text) {
  if (text.size() % 4 != 0) {
    throw Error(ErrorCode::kDecodeFailure, "base64 length not a multiple of 4");
  }
  Bytes out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::kDecodeFailure, "malformed base64");
  // EVP_DecodeBlock keeps the bytes produced by '=' padding.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

Bytes ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path);
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void WriteFileAtomic(const std::string& path, std::span<const std::uint8_t> data) {
  static std::atomic<unsigned> counter{0};
  const std::string tmp =
      path + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kIoFailure, "short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::kIoFailure, "rename to " + path + " failed");
  }
}

void WriteFileAtomic(const std::string& path, std::string_view data) {
  WriteFileAtomic(path, std::span<const std::uint8_t>(
                            reinterpret_cast<const std::uint8_t*>(data.data()),
                            data.size()));
}

}  // namespace forge
