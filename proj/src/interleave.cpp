// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/interleave.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "forge/error.hpp"
#include "forge/sample.hpp"

namespace forge {
namespace {

constexpr std::string_view kMarkerPrefix = "[Image";
constexpr std::size_t kMaxIndexDigits = 9;

bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::string_view LeftTrim(std::string_view s) {
  while (!s.empty() && IsSpace(s.front())) s.remove_prefix(1);
  return s;
}

std::string_view Trim(std::string_view s) {
  s = LeftTrim(s);
  while (!s.empty() && IsSpace(s.back())) s.remove_suffix(1);
  return s;
}

// Length of the marker starting at text[pos] and its index, or 0.
std::size_t MatchMarker(std::string_view text, std::size_t pos, int* index) {
  if (text.compare(pos, kMarkerPrefix.size(), kMarkerPrefix) != 0) return 0;
  std::size_t i = pos + kMarkerPrefix.size();
  const std::size_t digits_begin = i;
  while (i < text.size() && text[i] >= '0' && text[i] <= '9') ++i;
  const std::size_t digits = i - digits_begin;
  if (digits == 0 || digits > kMaxIndexDigits || text[digits_begin] == '0') {
    return 0;
  }
  if (i >= text.size() || text[i] != ']') return 0;
  int value = 0;
  for (std::size_t k = digits_begin; k < i; ++k) value = value * 10 + (text[k] - '0');
  *index = value;
  return i + 1 - pos;
}

// Validates a canonical alternating segment list and returns slot order.
std::vector<int> ValidateCanonical(const std::vector<Segment>& segments) {
  std::vector<int> order;
  std::set<int> seen;
  for (const Segment& seg : segments) {
    if (const auto* slot = std::get_if<VisualSlot>(&seg)) {
      if (!seen.insert(slot->index).second) {
        throw Error(ErrorCode::kDuplicateIndex,
                    "slot " + RenderMarker(slot->index) + " appears twice");
      }
      order.push_back(slot->index);
    }
  }
  const int k = static_cast<int>(order.size());
  if (!seen.empty() && (*seen.begin() != 1 || *seen.rbegin() != k)) {
    throw Error(ErrorCode::kNonContiguousIndices,
                "slot indices must be exactly 1.." + std::to_string(k));
  }
  for (std::size_t i = 2; i + 1 < segments.size(); i += 2) {
    if (std::get<TextSpan>(segments[i]).text.empty()) {
      throw Error(ErrorCode::kAdjacentSlots,
                  "slots " + RenderMarker(std::get<VisualSlot>(segments[i - 1]).index) +
                      " and " +
                      RenderMarker(std::get<VisualSlot>(segments[i + 1]).index) +
                      " have no text between them");
    }
  }
  return order;
}

bool EndsWithArticle(std::string_view out) {
  std::string_view s = out;
  while (!s.empty() && IsSpace(s.back())) s.remove_suffix(1);
  std::size_t end = s.size();
  std::size_t begin = end;
  while (begin > 0 && std::isalpha(static_cast<unsigned char>(s[begin - 1]))) --begin;
  std::string word(s.substr(begin, end - begin));
  std::transform(word.begin(), word.end(), word.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return word == "a" || word == "an" || word == "the";
}

bool AtSentenceStart(std::string_view out) {
  std::string_view s = out;
  while (!s.empty() && IsSpace(s.back())) s.remove_suffix(1);
  return s.empty() || s.back() == '.' || s.back() == '!' || s.back() == '?';
}

}  // namespace

bool IsValidUtf8(std::string_view text) {
  std::size_t i = 0;
  const auto byte = [&](std::size_t k) {
    return static_cast<unsigned char>(text[k]);
  };
  while (i < text.size()) {
    const unsigned char c = byte(i);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > text.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((byte(i + k) & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (byte(i + k) & 0x3F);
    }
    // Overlong forms, surrogates, and out-of-range code points.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
        (len == 4 && (cp < 0x10000 || cp > 0x10FFFF)) ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

std::string RenderMarker(int index) {
  return std::string(kMarkerPrefix) + std::to_string(index) + "]";
}

InterleavedInstruction::InterleavedInstruction() : segments_{TextSpan{}} {}

InterleavedInstruction InterleavedInstruction::FromSegments(
    std::vector<Segment> segments) {
  std::vector<Segment> canonical;
  canonical.reserve(segments.size() * 2 + 1);
  for (Segment& seg : segments) {
    if (auto* span = std::get_if<TextSpan>(&seg)) {
      if (!IsValidUtf8(span->text)) {
        throw Error(ErrorCode::kInvalidUtf8, "text span is not valid UTF-8");
      }
      if (!canonical.empty() && std::holds_alternative<TextSpan>(canonical.back())) {
        std::get<TextSpan>(canonical.back()).text += span->text;
      } else {
        canonical.push_back(std::move(*span));
      }
    } else {
      if (std::get<VisualSlot>(seg).index < 1) {
        throw Error(ErrorCode::kNonContiguousIndices, "slot index must be >= 1");
      }
      if (canonical.empty() || std::holds_alternative<VisualSlot>(canonical.back())) {
        canonical.push_back(TextSpan{});
      }
      canonical.push_back(seg);
    }
  }
  if (canonical.empty() || std::holds_alternative<VisualSlot>(canonical.back())) {
    canonical.push_back(TextSpan{});
  }
  for (const Segment& seg : canonical) {
    if (const auto* span = std::get_if<TextSpan>(&seg)) {
      for (std::size_t pos = span->text.find(kMarkerPrefix); pos != std::string::npos;
           pos = span->text.find(kMarkerPrefix, pos + 1)) {
        int unused = 0;
        if (MatchMarker(span->text, pos, &unused) != 0) {
          throw Error(ErrorCode::kMarkerInText,
                      "text span contains a slot marker: " + span->text);
        }
      }
    }
  }
  InterleavedInstruction out;
  out.slot_order_ = ValidateCanonical(canonical);
  out.segments_ = std::move(canonical);
  return out;
}

const std::string& InterleavedInstruction::SpanAfterSlot(std::size_t position) const {
  return std::get<TextSpan>(segments_.at(2 * position + 2)).text;
}

std::vector<std::string> InterleavedInstruction::TextSpans() const {
  std::vector<std::string> out;
  for (const Segment& seg : segments_) {
    if (const auto* span = std::get_if<TextSpan>(&seg)) out.push_back(span->text);
  }
  return out;
}

InterleavedInstruction ParseTemplate(std::string_view text) {
  if (!IsValidUtf8(text)) {
    throw Error(ErrorCode::kInvalidUtf8, "instruction is not valid UTF-8");
  }
  std::vector<Segment> segments;
  std::string pending;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t next = text.find(kMarkerPrefix, i);
    if (next == std::string_view::npos) {
      pending.append(text.substr(i));
      break;
    }
    int index = 0;
    const std::size_t len = MatchMarker(text, next, &index);
    if (len == 0) {
      pending.append(text.substr(i, next + 1 - i));
      i = next + 1;
      continue;
    }
    pending.append(text.substr(i, next - i));
    segments.push_back(TextSpan{std::move(pending)});
    pending.clear();
    segments.push_back(VisualSlot{index});
    i = next + len;
  }
  segments.push_back(TextSpan{std::move(pending)});

  InterleavedInstruction out = InterleavedInstruction::FromSegments(std::move(segments));
  return out;
}

std::string RenderTemplate(const InterleavedInstruction& instr) {
  std::string out;
  for (const Segment& seg : instr.segments()) {
    if (const auto* span = std::get_if<TextSpan>(&seg)) {
      out += span->text;
    } else {
      out += RenderMarker(std::get<VisualSlot>(seg).index);
    }
  }
  return out;
}

std::string_view ViolationKindName(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kIndexOutOfRange: return "IndexOutOfRange";
    case ViolationKind::kMissingIndex: return "MissingIndex";
    case ViolationKind::kDuplicateIndex: return "DuplicateIndex";
    case ViolationKind::kEmptyPhrase: return "EmptyPhrase";
    case ViolationKind::kPhraseNotAdjacent: return "PhraseNotAdjacent";
  }
  return "Unknown";
}

bool ValidationReport::Has(ViolationKind kind) const {
  return std::any_of(violations.begin(), violations.end(),
                     [kind](const Violation& v) { return v.kind == kind; });
}

std::string ValidationReport::ToString() const {
  std::string out;
  for (const Violation& v : violations) {
    out += std::string(ViolationKindName(v.kind)) + " index=" + std::to_string(v.index);
    if (!v.phrase.empty()) out += " phrase=\"" + v.phrase + "\"";
    if (!v.detail.empty()) out += ": " + v.detail;
    out += '\n';
  }
  return out;
}

const PhraseEntry* PhraseMapping::Find(int index) const {
  for (const PhraseEntry& e : entries) {
    if (e.image_index == index) return &e;
  }
  return nullptr;
}

ValidationReport ValidateMapping(const InterleavedInstruction& instr,
                                 const PhraseMapping& mapping) {
  ValidationReport report;
  const int k = static_cast<int>(instr.slot_count());
  std::vector<std::size_t> position_of(static_cast<std::size_t>(k) + 1);
  for (std::size_t p = 0; p < instr.slot_order().size(); ++p) {
    position_of[static_cast<std::size_t>(instr.slot_order()[p])] = p;
  }
  std::set<int> seen;
  for (const PhraseEntry& e : mapping.entries) {
    if (e.image_index < 1 || e.image_index > k) {
      report.violations.push_back({ViolationKind::kIndexOutOfRange, e.image_index,
                                   e.phrase,
                                   "instruction has " + std::to_string(k) + " slots"});
      continue;
    }
    if (!seen.insert(e.image_index).second) {
      report.violations.push_back(
          {ViolationKind::kDuplicateIndex, e.image_index, e.phrase, ""});
      continue;
    }
    const std::string_view phrase = Trim(e.phrase);
    if (phrase.empty()) {
      report.violations.push_back({ViolationKind::kEmptyPhrase, e.image_index, "", ""});
      continue;
    }
    const std::string_view after =
        LeftTrim(instr.SpanAfterSlot(position_of[static_cast<std::size_t>(e.image_index)]));
    if (after.substr(0, phrase.size()) != phrase) {
      report.violations.push_back(
          {ViolationKind::kPhraseNotAdjacent, e.image_index, e.phrase,
           "text after " + RenderMarker(e.image_index) + " is \"" +
               std::string(after.substr(0, 40)) + "\""});
    }
  }
  for (int i = 1; i <= k; ++i) {
    if (!seen.contains(i)) {
      report.violations.push_back({ViolationKind::kMissingIndex, i, "", ""});
    }
  }
  return report;
}

std::string CollapseSpaces(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_space = false;
  for (char c : text) {
    if (IsSpace(c)) {
      if (!in_space) out += ' ';
      in_space = true;
    } else {
      out += c;
      in_space = false;
    }
  }
  return out;
}

std::string StripMarkers(const InterleavedInstruction& instr) {
  // A deleted marker still separates the words on either side of it.
  std::string joined;
  for (const Segment& seg : instr.segments()) {
    if (const auto* span = std::get_if<TextSpan>(&seg)) {
      joined += span->text;
    } else {
      joined += ' ';
    }
  }
  return std::string(Trim(CollapseSpaces(joined)));
}

std::vector<VisualBlock> TokenLayout::Blocks() const {
  std::vector<VisualBlock> out;
  for (const auto& e : elements) {
    if (const auto* b = std::get_if<VisualBlock>(&e)) out.push_back(*b);
  }
  return out;
}

std::vector<std::int32_t> TokenLayout::TextTokens() const {
  std::vector<std::int32_t> out;
  for (const auto& e : elements) {
    if (const auto* r = std::get_if<TextTokenRun>(&e)) {
      out.insert(out.end(), r->token_ids.begin(), r->token_ids.end());
    }
  }
  return out;
}

TokenLayout AssembleLayout(const InterleavedInstruction& instr,
                           const TextTokenizer& tokenizer,
                           std::size_t visual_block_len) {
  if (visual_block_len == 0) {
    throw Error(ErrorCode::kInvalidArgument, "visual_block_len must be >= 1");
  }
  TokenLayout layout;
  std::size_t offset = 0;
  for (const Segment& seg : instr.segments()) {
    if (const auto* span = std::get_if<TextSpan>(&seg)) {
      const std::string collapsed = CollapseSpaces(span->text);
      if (Trim(collapsed).empty()) continue;
      std::vector<std::int32_t> tokens = tokenizer(collapsed);
      if (tokens.empty()) {
        throw Error(ErrorCode::kTokenizerFailure,
                    "tokenizer returned no tokens for \"" + collapsed + "\"");
      }
      const std::size_t n = tokens.size();
      layout.elements.push_back(TextTokenRun{std::move(tokens), offset});
      offset += n;
    } else {
      layout.elements.push_back(
          VisualBlock{std::get<VisualSlot>(seg).index, visual_block_len, offset});
      offset += visual_block_len;
    }
  }
  layout.total_length = offset;
  return layout;
}

IndexedPrompt ToImageFirst(const InterleavedSample& sample) {
  const InterleavedInstruction& instr = sample.instruction;
  for (int index : instr.slot_order()) {
    if (sample.mapping.Find(index) == nullptr) {
      throw Error(ErrorCode::kUnmappedSlot,
                  RenderMarker(index) + " has no mapping entry");
    }
  }
  const ValidationReport report = ValidateMapping(instr, sample.mapping);
  if (!report.ok()) throw Error(ErrorCode::kInvalidMapping, report.ToString());

  std::string out;
  const auto& segs = instr.segments();
  out += std::get<TextSpan>(segs[0]).text;
  for (std::size_t p = 0; p < instr.slot_count(); ++p) {
    const int index = instr.slot_order()[p];
    const std::string_view phrase = Trim(sample.mapping.Find(index)->phrase);
    std::string_view rest = LeftTrim(instr.SpanAfterSlot(p));
    rest.remove_prefix(phrase.size());
    if (!EndsWithArticle(out)) out += AtSentenceStart(out) ? "The " : "the ";
    out += phrase;
    out += " in Image " + std::to_string(index);
    out += rest;
  }
  // Literal near-miss markers left in the text ("[Image 2]") must not read
  // as markers in the indexed format.
  for (std::size_t pos = out.find(kMarkerPrefix); pos != std::string::npos;
       pos = out.find(kMarkerPrefix, pos)) {
    out[pos] = '(';
  }
  IndexedPrompt result;
  result.assets = sample.assets;
  result.prompt = std::move(out);
  return result;
}

}  // namespace forge
