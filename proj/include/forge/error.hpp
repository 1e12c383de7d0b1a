// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace forge {

enum class ErrorCode {
  // interleave
  kInvalidUtf8,
  kDuplicateIndex,
  kNonContiguousIndices,
  kAdjacentSlots,
  kMarkerInText,
  kTokenizerFailure,
  kInvalidArgument,
  kUnmappedSlot,
  kInvalidMapping,
  // guidance
  kLengthMismatch,
  kNonFinite,
  // clients
  kSchemaViolation,
  kExhausted,
  kTimeout,
  kNonRetriable,
  kUnknownRequest,
  // raster
  kDecodeFailure,
  // engines
  kAllDropped,
  kWeaveFailed,
  kSampleRejected,
  kNoValidPairs,
  // benchmark
  kIncompatibleSet,
  kJudgeOutOfRange,
  kFormulationFailed,
  kAnswerUnparseable,
  kAlreadyDecided,
  kUnknownCase,
  kLeaseConflict,
  kNotAccepted,
  kEmptyInput,
  // store
  kInvalidSample,
  kIoFailure,
  kDigestMismatch,
  kMissingBlob,
  kManifestNotFound,
  kEmptySource,
  // config
  kConfigError,
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace forge
