// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Native interleaved instruction format: reference images occupy in-place
// `[ImageK]` slots inside the sentence. Parsing, rendering, phrase-mapping
// validation, token layout assembly, and conversion to the image-first
// indexed prompt used by baselines.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "forge/asset.hpp"

namespace forge {

struct InterleavedSample;

struct TextSpan {
  std::string text;
  friend bool operator==(const TextSpan&, const TextSpan&) = default;
};

struct VisualSlot {
  int index = 0;  // 1-based
  friend bool operator==(const VisualSlot&, const VisualSlot&) = default;
};

using Segment = std::variant<TextSpan, VisualSlot>;

// Immutable once built. Segments are kept in canonical alternating form
// text, slot, text, ..., slot, text: K slots always come with K + 1 spans,
// any of which may be empty except the ones separating two slots.
class InterleavedInstruction {
 public:
  // Empty instruction: one empty span, zero slots.
  InterleavedInstruction();

  // Normalizes (merges adjacent spans, inserts empty spans around slots)
  // and validates. Throws DuplicateIndex, NonContiguousIndices,
  // AdjacentSlots, or MarkerInText when a span would re-parse as a marker.
  static InterleavedInstruction FromSegments(std::vector<Segment> segments);

  const std::vector<Segment>& segments() const { return segments_; }
  std::size_t slot_count() const { return slot_order_.size(); }
  // Slot indices in textual order.
  const std::vector<int>& slot_order() const { return slot_order_; }
  // The span following the i-th slot in textual order.
  const std::string& SpanAfterSlot(std::size_t position) const;
  std::vector<std::string> TextSpans() const;

  friend bool operator==(const InterleavedInstruction&,
                         const InterleavedInstruction&) = default;

 private:
  std::vector<Segment> segments_;
  std::vector<int> slot_order_;
};

// Parses `[ImageK]` markers (K decimal >= 1 without leading zeros or
// whitespace) into slots. Anything else, including near-miss markers such
// as "[Image 1]" or "[Image01]", stays text.
InterleavedInstruction ParseTemplate(std::string_view text);
std::string RenderTemplate(const InterleavedInstruction& instr);
std::string RenderMarker(int index);

enum class ViolationKind {
  kIndexOutOfRange,
  kMissingIndex,
  kDuplicateIndex,
  kEmptyPhrase,
  kPhraseNotAdjacent,
};

std::string_view ViolationKindName(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  int index = 0;
  std::string phrase;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool Has(ViolationKind kind) const;
  // One line per violation.
  std::string ToString() const;
};

ValidationReport ValidateMapping(const InterleavedInstruction& instr,
                                 const PhraseMapping& mapping);

struct TextTokenRun {
  std::vector<std::int32_t> token_ids;
  std::size_t start_offset = 0;
  friend bool operator==(const TextTokenRun&, const TextTokenRun&) = default;
};

struct VisualBlock {
  int slot_index = 0;
  std::size_t length = 0;
  std::size_t start_offset = 0;
  friend bool operator==(const VisualBlock&, const VisualBlock&) = default;
};

using LayoutElement = std::variant<TextTokenRun, VisualBlock>;

struct TokenLayout {
  std::vector<LayoutElement> elements;
  std::size_t total_length = 0;

  std::vector<VisualBlock> Blocks() const;
  std::vector<std::int32_t> TextTokens() const;
};

using TextTokenizer = std::function<std::vector<std::int32_t>(std::string_view)>;

// Runs of whitespace inside each span are collapsed to one space before the
// tokenizer sees them; spans with no visible characters emit no run.
TokenLayout AssembleLayout(const InterleavedInstruction& instr,
                           const TextTokenizer& tokenizer,
                           std::size_t visual_block_len);

// Collapses runs of ASCII whitespace to a single space.
std::string CollapseSpaces(std::string_view text);

// Marker-free text: each marker becomes a space, whitespace runs collapse
// to one space, and the ends are trimmed.
std::string StripMarkers(const InterleavedInstruction& instr);

struct IndexedPrompt {
  std::vector<VisualAsset> assets;  // slot 1 first
  std::string prompt;
};

// Image-first baseline format: `[ImageK] <phrase>` becomes
// `the <phrase> in Image K`, without the article when the marker already
// follows one.
IndexedPrompt ToImageFirst(const InterleavedSample& sample);

bool IsValidUtf8(std::string_view text);

}  // namespace forge
