// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Multi-reference benchmark: case curation from an entity pool, the judge
// based image-consistency score, the binary-question text-consistency score,
// and the per-object-count report.

#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "forge/asset.hpp"
#include "forge/clients.hpp"
#include "forge/interleave.hpp"
#include "forge/rng.hpp"

namespace forge::bench {

inline constexpr int kMinObjects = 2;
inline constexpr int kMaxObjects = 5;

// One reference entity: an image plus the words the instruction writer uses.
struct BenchEntity {
  std::string entity_id;
  std::string label;
  std::string description;
  VisualAsset asset;  // source = full_image
};

// Pool directory layout: entities.json,
// {"entities": [{"id", "file", "label", "description"}, ...]}.
std::vector<BenchEntity> LoadEntityPool(const std::filesystem::path& dir);
void SaveEntityPool(const std::vector<BenchEntity>& pool, const std::filesystem::path& dir);

enum class ReviewState { kPending, kAccepted, kRejected };

std::string_view ReviewStateName(ReviewState state);

struct BenchCase {
  std::string case_id;
  std::vector<std::string> entity_ids;
  std::vector<VisualAsset> references;  // references[k - 1] fills slot k
  InterleavedInstruction instruction;
  PhraseMapping mapping;
  int n_objects = 0;
  ReviewState review_state = ReviewState::kPending;
  std::string reject_reason;

  // Reference bytes are written as {"digest", "origin_ref"}; the blobs live
  // elsewhere, so FromJson takes a loader for them.
  clients::Json ToJson() const;
  static BenchCase FromJson(const clients::Json& j,
                            const std::function<Bytes(const std::string&)>& load_blob);
};

struct CurateOptions {
  int compatibility_attempts = 5;  // entity draws before IncompatibleSet
  int llm_retry_limit = 3;         // total writer attempts
};

// Question put to the qa_answerer over a strip of all references.
extern const char kCompatibilityQuestion[];

// Draws N uniformly from {2..5} and N distinct entities, checks that they
// can share one scene, and has the writer weave an instruction. The case is
// always pending. Throws Error(kIncompatibleSet), Error(kWeaveFailed),
// Error(kInvalidArgument) for a pool smaller than five.
BenchCase CurateCase(const std::vector<BenchEntity>& pool, Rng& rng, clients::Clients& clients,
                     const CurateOptions& options = {});

struct CurateBatch {
  std::vector<BenchCase> cases;
  int incompatible = 0;  // draws that ended in IncompatibleSet
  int duplicates = 0;    // draws that repeated an earlier entity set
};

// Curates up to `count` distinct cases from one generator seeded with
// `seed`, stopping after 4 * count draws.
CurateBatch CurateCases(const std::vector<BenchEntity>& pool, int count, std::uint64_t seed,
                        clients::Clients& clients, const CurateOptions& options = {});

// ---- image consistency ------------------------------------------------------

struct ImageScore {
  int raw = 0;            // 1..5
  double normalized = 0;  // (raw - 1) / 4
};

double NormalizeRating(int rating);

extern const char kJudgeRubric[];

// One re-ask on an out-of-range rating, then Error(kJudgeOutOfRange).
ImageScore ScoreImageConsistency(const Bytes& generated_png, const BenchCase& c,
                                 clients::Clients& clients);

// ---- text consistency -------------------------------------------------------

struct Question {
  std::string text;
  std::string kind;  // attribute | relation
  std::optional<int> index;
  friend bool operator==(const Question&, const Question&) = default;
};

struct QuestionSet {
  std::string case_id;
  std::vector<Question> questions;
  friend bool operator==(const QuestionSet&, const QuestionSet&) = default;

  clients::Json ToJson() const;
  static QuestionSet FromJson(const clients::Json& j);
};

// At least one attribute question per mapped phrase and one relation
// question when N >= 2; writer output is topped up from templates to meet
// the floor. Two empty writer answers raise Error(kFormulationFailed).
QuestionSet FormulateQuestions(const BenchCase& c, clients::Clients& clients);

// Question sets persisted as NDJSON so evaluation is repeatable.
class QuestionBank {
 public:
  explicit QuestionBank(std::filesystem::path path);
  const QuestionSet* Find(const std::string& case_id) const;
  // Returns the stored set, formulating and appending it when missing.
  QuestionSet GetOrFormulate(const BenchCase& c, clients::Clients& clients);

 private:
  std::filesystem::path path_;
  std::map<std::string, QuestionSet> sets_;
  std::mutex mu_;
};

// "yes"/"no" at the start of the answer, case and punctuation insensitive.
std::optional<bool> ParseYesNo(std::string_view answer);

struct TextScore {
  std::vector<std::string> answers;  // verbatim
  std::vector<bool> yes;
  double score = 0;  // yes count / question count
};

// One re-ask per unparseable answer, then Error(kAnswerUnparseable).
TextScore ScoreTextConsistency(const Bytes& generated_png, const QuestionSet& questions,
                               clients::Clients& clients);

// ---- records and report -----------------------------------------------------

struct EvalRecord {
  std::string case_id;
  int n_objects = 0;
  int judge_rating_raw = 0;
  double image_consistency = 0;
  double text_consistency = 0;
  std::vector<bool> qa_answers;
  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;

  clients::Json ToJson() const;
  static EvalRecord FromJson(const clients::Json& j);
};

// Throws Error(kNotAccepted) unless the case was accepted in review.
EvalRecord EvaluateCase(const BenchCase& c, const Bytes& generated_png,
                        const QuestionSet& questions, clients::Clients& clients);

struct EvalOutcome {
  std::string case_id;
  std::optional<EvalRecord> record;
  std::string error;  // set when record is empty
};

// Questions are fetched from (or added to) `bank` sequentially in input
// order, then cases are scored on `workers` threads. Results keep input
// order. `generated` returns the image under test for a case.
std::vector<EvalOutcome> EvaluateCases(const std::vector<BenchCase>& cases,
                                       const std::function<Bytes(const BenchCase&)>& generated,
                                       QuestionBank& bank, clients::Clients& clients, int workers,
                                       const std::atomic<bool>* stop = nullptr);

struct ReportCell {
  std::size_t count = 0;
  double image_consistency = 0;
  double text_consistency = 0;
};

struct ReportTable {
  std::map<int, ReportCell> buckets;  // by object count; empty buckets absent
  ReportCell overall;

  clients::Json ToJson() const;
  // Aligned text table, two decimals, half away from zero.
  std::string ToText() const;
};

// Throws Error(kEmptyInput) with no records, Error(kInvalidArgument) for an
// object count outside 2..5.
ReportTable AggregateReport(const std::vector<EvalRecord>& records);

// Decimal rendering of `value` rounded half away from zero. The value is
// first printed with 12 significant decimals so binary noise such as
// 0.92749999... reads as 0.9275.
std::string FormatRounded(double value, int decimals = 2);

std::string BucketName(int n_objects);

}  // namespace forge::bench
