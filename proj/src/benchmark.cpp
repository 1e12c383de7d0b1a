// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/benchmark.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/image_engine.hpp"
#include "forge/raster.hpp"
#include "forge/worker_pool.hpp"

namespace forge::bench {
namespace fs = std::filesystem;
using clients::ClientRole;
using clients::Json;

const char kCompatibilityQuestion[] =
    "Each panel of this strip shows one entity. Could all of these entities plausibly appear "
    "together in a single coherent, natural scene without contradicting each other? Answer yes "
    "or no.";

const char kJudgeRubric[] =
    "Rate from 1 to 5 how well the generated image preserves the identity of every reference "
    "entity. Penalize identity drift such as a changed species, shape, markings or texture. Do "
    "not penalize changes the instruction asks for or implies, such as pose, lighting, viewpoint "
    "or placement. Instruction: ";

namespace {

constexpr const char kEntitiesFile[] = "entities.json";
constexpr const char kReaskSuffix[] = " Answer with a single word: yes or no.";

Json MappingJson(const PhraseMapping& m) {
  Json out = Json::array();
  for (const auto& e : m.entries) out.push_back({{"phrase", e.phrase}, {"index", e.image_index}});
  return out;
}

PhraseMapping MappingFromJson(const Json& j) {
  PhraseMapping m;
  for (const Json& e : j) m.entries.push_back({e.at("phrase").get<std::string>(), e.at("index").get<int>()});
  return m;
}

}  // namespace

// ---- entity pool ------------------------------------------------------------

std::vector<BenchEntity> LoadEntityPool(const fs::path& dir) {
  const fs::path index = dir / kEntitiesFile;
  if (!fs::is_regular_file(index)) throw Error(ErrorCode::kIoFailure, index.string() + " not found");
  Json doc;
  try {
    std::ifstream in(index);
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kDecodeFailure, index.string() + ": " + e.what());
  }
  std::vector<BenchEntity> pool;
  for (const Json& e : doc.at("entities")) {
    BenchEntity b;
    b.entity_id = e.at("id").get<std::string>();
    b.label = e.at("label").get<std::string>();
    b.description = e.at("description").get<std::string>();
    const std::string file = e.at("file").get<std::string>();
    b.asset.image_bytes = ReadFileBytes((dir / file).string());
    b.asset.source = AssetSource::kFullImage;
    b.asset.origin_ref = b.entity_id;
    pool.push_back(std::move(b));
  }
  return pool;
}

void SaveEntityPool(const std::vector<BenchEntity>& pool, const fs::path& dir) {
  fs::create_directories(dir);
  Json entities = Json::array();
  for (const BenchEntity& e : pool) {
    const std::string file = e.entity_id + ".png";
    WriteFileAtomic((dir / file).string(), e.asset.image_bytes);
    entities.push_back(
        {{"id", e.entity_id}, {"file", file}, {"label", e.label}, {"description", e.description}});
  }
  WriteFileAtomic((dir / kEntitiesFile).string(), Json{{"entities", entities}}.dump(2) + "\n");
}

// ---- cases ------------------------------------------------------------------

std::string_view ReviewStateName(ReviewState state) {
  switch (state) {
    case ReviewState::kPending: return "pending";
    case ReviewState::kAccepted: return "accepted";
    case ReviewState::kRejected: return "rejected";
  }
  return "unknown";
}

Json BenchCase::ToJson() const {
  Json refs = Json::array();
  for (const VisualAsset& r : references) {
    refs.push_back({{"digest", Sha256Hex(r.image_bytes)}, {"origin_ref", r.origin_ref}});
  }
  Json j = {{"case_id", case_id},
            {"n_objects", n_objects},
            {"entity_ids", entity_ids},
            {"instruction", RenderTemplate(instruction)},
            {"mapping", MappingJson(mapping)},
            {"references", refs},
            {"review_state", ReviewStateName(review_state)}};
  if (!reject_reason.empty()) j["reject_reason"] = reject_reason;
  return j;
}

BenchCase BenchCase::FromJson(const Json& j,
                              const std::function<Bytes(const std::string&)>& load_blob) {
  BenchCase c;
  try {
    c.case_id = j.at("case_id").get<std::string>();
    c.n_objects = j.at("n_objects").get<int>();
    c.entity_ids = j.at("entity_ids").get<std::vector<std::string>>();
    c.instruction = ParseTemplate(j.at("instruction").get<std::string>());
    c.mapping = MappingFromJson(j.at("mapping"));
    for (const Json& r : j.at("references")) {
      VisualAsset a;
      a.image_bytes = load_blob(r.at("digest").get<std::string>());
      a.source = AssetSource::kFullImage;
      a.origin_ref = r.at("origin_ref").get<std::string>();
      c.references.push_back(std::move(a));
    }
    const std::string state = j.value("review_state", "pending");
    c.review_state = state == "accepted"   ? ReviewState::kAccepted
                     : state == "rejected" ? ReviewState::kRejected
                                           : ReviewState::kPending;
    c.reject_reason = j.value("reject_reason", "");
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kDecodeFailure, std::string("bench case: ") + e.what());
  }
  return c;
}

BenchCase CurateCase(const std::vector<BenchEntity>& pool, Rng& rng, clients::Clients& clients,
                     const CurateOptions& options) {
  if (pool.size() < static_cast<std::size_t>(kMaxObjects)) {
    throw Error(ErrorCode::kInvalidArgument,
                "entity pool needs at least " + std::to_string(kMaxObjects) + " entries");
  }
  const int n = static_cast<int>(rng.Between(kMinObjects, kMaxObjects));
  for (int attempt = 1; attempt <= options.compatibility_attempts; ++attempt) {
    const auto picks = rng.SampleIndices(pool.size(), static_cast<std::size_t>(n));
    std::vector<const BenchEntity*> chosen;
    for (std::size_t i : picks) chosen.push_back(&pool[i]);

    Raster strip = DecodePng(chosen[0]->asset.image_bytes);
    for (std::size_t k = 1; k < chosen.size(); ++k) {
      strip = ConcatHorizontal(strip, DecodePng(chosen[k]->asset.image_bytes));
    }
    const Json reply = clients.Request(
        ClientRole::kQaAnswerer,
        {{"image_b64", Base64Encode(EncodePng(strip))}, {"question", kCompatibilityQuestion}});
    if (ParseYesNo(reply["answer"].get<std::string>()) != true) continue;

    std::string scene = "One coherent scene that brings together ";
    std::vector<image::WeaveObject> objects;
    for (std::size_t k = 0; k < chosen.size(); ++k) {
      if (k > 0) scene += k + 1 == chosen.size() ? " and " : ", ";
      scene += chosen[k]->description;
      objects.push_back({chosen[k]->label, chosen[k]->description});
    }
    scene += ".";
    image::WeaveResult woven =
        image::WeaveInstruction(scene, objects, clients, options.llm_retry_limit);

    BenchCase c;
    std::string key;
    for (const BenchEntity* e : chosen) {
      c.entity_ids.push_back(e->entity_id);
      c.references.push_back(e->asset);
      key += e->entity_id + "|";
    }
    c.case_id = "case-" + Sha256Hex(key).substr(0, 12);
    c.instruction = std::move(woven.instruction);
    c.mapping = std::move(woven.mapping);
    c.n_objects = n;
    c.review_state = ReviewState::kPending;
    return c;
  }
  throw Error(ErrorCode::kIncompatibleSet,
              "no compatible set of " + std::to_string(n) + " entities in " +
                  std::to_string(options.compatibility_attempts) + " draws");
}

CurateBatch CurateCases(const std::vector<BenchEntity>& pool, int count, std::uint64_t seed,
                        clients::Clients& clients, const CurateOptions& options) {
  CurateBatch batch;
  Rng rng(seed);
  std::set<std::string> seen;
  for (int draw = 0; draw < 4 * count && static_cast<int>(batch.cases.size()) < count; ++draw) {
    try {
      BenchCase c = CurateCase(pool, rng, clients, options);
      if (!seen.insert(c.case_id).second) {
        ++batch.duplicates;
        continue;
      }
      batch.cases.push_back(std::move(c));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kIncompatibleSet) throw;
      ++batch.incompatible;
    }
  }
  return batch;
}

// ---- image consistency ------------------------------------------------------

double NormalizeRating(int rating) {
  if (rating < 1 || rating > 5) {
    throw Error(ErrorCode::kJudgeOutOfRange, "rating " + std::to_string(rating) + " outside 1..5");
  }
  return (rating - 1) / 4.0;
}

ImageScore ScoreImageConsistency(const Bytes& generated_png, const BenchCase& c,
                                 clients::Clients& clients) {
  Json refs = Json::array();
  for (const VisualAsset& r : c.references) refs.push_back(Base64Encode(r.image_bytes));
  Json request = {{"generated_b64", Base64Encode(generated_png)},
                  {"references", refs},
                  {"instruction", kJudgeRubric + RenderTemplate(c.instruction)}};
  int rating = 0;
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (attempt == 1) {
      request["instruction"] = request["instruction"].get<std::string>() +
                               " Reply with an integer rating between 1 and 5.";
    }
    rating = clients.Request(ClientRole::kJudge, request)["rating"].get<int>();
    if (rating >= 1 && rating <= 5) return {rating, NormalizeRating(rating)};
  }
  throw Error(ErrorCode::kJudgeOutOfRange,
              "judge rated " + std::to_string(rating) + " twice outside 1..5");
}

// ---- questions --------------------------------------------------------------

Json QuestionSet::ToJson() const {
  Json qs = Json::array();
  for (const Question& q : questions) {
    Json j = {{"text", q.text}, {"kind", q.kind}};
    if (q.index) j["index"] = *q.index;
    qs.push_back(std::move(j));
  }
  return {{"case_id", case_id}, {"questions", qs}};
}

QuestionSet QuestionSet::FromJson(const Json& j) {
  QuestionSet s;
  s.case_id = j.at("case_id").get<std::string>();
  for (const Json& q : j.at("questions")) {
    Question out{q.at("text").get<std::string>(), q.at("kind").get<std::string>(), std::nullopt};
    if (q.contains("index")) out.index = q["index"].get<int>();
    s.questions.push_back(std::move(out));
  }
  return s;
}

QuestionSet FormulateQuestions(const BenchCase& c, clients::Clients& clients) {
  Json phrases = Json::array();
  for (const auto& e : c.mapping.entries) phrases.push_back({{"phrase", e.phrase}, {"index", e.image_index}});
  const Json request = {{"instruction", RenderTemplate(c.instruction)}, {"phrases", phrases}};

  QuestionSet set;
  set.case_id = c.case_id;
  for (int attempt = 0; attempt < 2 && set.questions.empty(); ++attempt) {
    const Json reply = clients.Request(ClientRole::kQuestionWriter, request);
    for (const Json& q : reply["questions"]) {
      std::string text = q["text"].get<std::string>();
      if (text.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      Question out{std::move(text), q["kind"].get<std::string>(), std::nullopt};
      if (q.contains("index")) out.index = q["index"].get<int>();
      set.questions.push_back(std::move(out));
    }
  }
  if (set.questions.empty()) {
    throw Error(ErrorCode::kFormulationFailed, c.case_id + ": writer returned no questions twice");
  }

  // Floor: an attribute question per phrase, a relation question for N >= 2.
  for (const auto& e : c.mapping.entries) {
    const bool covered = std::any_of(set.questions.begin(), set.questions.end(), [&](const Question& q) {
      return q.kind == "attribute" && q.index == e.image_index;
    });
    if (!covered) {
      set.questions.push_back({"Does the image show the " + e.phrase + " from reference image " +
                                   std::to_string(e.image_index) + "?",
                               "attribute", e.image_index});
    }
  }
  const bool has_relation = std::any_of(set.questions.begin(), set.questions.end(),
                                        [](const Question& q) { return q.kind == "relation"; });
  if (c.mapping.entries.size() >= 2 && !has_relation) {
    set.questions.push_back({"Are the " + c.mapping.entries[0].phrase + " and the " +
                                 c.mapping.entries[1].phrase +
                                 " arranged together as the instruction describes?",
                             "relation", std::nullopt});
  }
  return set;
}

QuestionBank::QuestionBank(fs::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      QuestionSet s = QuestionSet::FromJson(Json::parse(line));
      sets_[s.case_id] = std::move(s);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kDecodeFailure,
                  path_.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

const QuestionSet* QuestionBank::Find(const std::string& case_id) const {
  auto it = sets_.find(case_id);
  return it == sets_.end() ? nullptr : &it->second;
}

QuestionSet QuestionBank::GetOrFormulate(const BenchCase& c, clients::Clients& clients) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (const QuestionSet* s = Find(c.case_id)) return *s;
  }
  QuestionSet fresh = FormulateQuestions(c, clients);
  std::lock_guard<std::mutex> lock(mu_);
  if (const QuestionSet* s = Find(c.case_id)) return *s;
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app);
  out << fresh.ToJson().dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot append to " + path_.string());
  sets_[c.case_id] = fresh;
  return fresh;
}

// ---- text consistency -------------------------------------------------------

std::optional<bool> ParseYesNo(std::string_view answer) {
  std::size_t i = 0;
  while (i < answer.size() && !std::isalpha(static_cast<unsigned char>(answer[i]))) ++i;
  std::string word;
  while (i < answer.size() && std::isalpha(static_cast<unsigned char>(answer[i]))) {
    word += static_cast<char>(std::tolower(static_cast<unsigned char>(answer[i])));
    ++i;
  }
  if (word == "yes") return true;
  if (word == "no") return false;
  return std::nullopt;
}

TextScore ScoreTextConsistency(const Bytes& generated_png, const QuestionSet& questions,
                               clients::Clients& clients) {
  if (questions.questions.empty()) {
    throw Error(ErrorCode::kInvalidArgument, questions.case_id + ": no questions");
  }
  const std::string b64 = Base64Encode(generated_png);
  TextScore score;
  std::size_t yes_count = 0;
  for (const Question& q : questions.questions) {
    std::string answer =
        clients.Request(ClientRole::kQaAnswerer, {{"image_b64", b64}, {"question", q.text}})["answer"]
            .get<std::string>();
    std::optional<bool> parsed = ParseYesNo(answer);
    if (!parsed) {
      answer = clients.Request(ClientRole::kQaAnswerer,
                               {{"image_b64", b64}, {"question", q.text + kReaskSuffix}})["answer"]
                   .get<std::string>();
      parsed = ParseYesNo(answer);
    }
    if (!parsed) {
      throw Error(ErrorCode::kAnswerUnparseable, "\"" + answer + "\" to \"" + q.text + "\"");
    }
    score.answers.push_back(std::move(answer));
    score.yes.push_back(*parsed);
    if (*parsed) ++yes_count;
  }
  score.score = static_cast<double>(yes_count) / static_cast<double>(questions.questions.size());
  return score;
}

// ---- records ----------------------------------------------------------------

Json EvalRecord::ToJson() const {
  return {{"case_id", case_id},
          {"n_objects", n_objects},
          {"judge_rating_raw", judge_rating_raw},
          {"image_consistency", image_consistency},
          {"text_consistency", text_consistency},
          {"qa_answers", qa_answers}};
}

EvalRecord EvalRecord::FromJson(const Json& j) {
  EvalRecord r;
  r.case_id = j.at("case_id").get<std::string>();
  r.n_objects = j.at("n_objects").get<int>();
  r.judge_rating_raw = j.at("judge_rating_raw").get<int>();
  r.image_consistency = j.at("image_consistency").get<double>();
  r.text_consistency = j.at("text_consistency").get<double>();
  r.qa_answers = j.at("qa_answers").get<std::vector<bool>>();
  return r;
}

EvalRecord EvaluateCase(const BenchCase& c, const Bytes& generated_png,
                        const QuestionSet& questions, clients::Clients& clients) {
  if (c.review_state != ReviewState::kAccepted) {
    throw Error(ErrorCode::kNotAccepted,
                c.case_id + " is " + std::string(ReviewStateName(c.review_state)));
  }
  if (questions.case_id != c.case_id) {
    throw Error(ErrorCode::kInvalidArgument, "questions belong to " + questions.case_id);
  }
  const ImageScore image = ScoreImageConsistency(generated_png, c, clients);
  const TextScore text = ScoreTextConsistency(generated_png, questions, clients);
  EvalRecord r;
  r.case_id = c.case_id;
  r.n_objects = c.n_objects;
  r.judge_rating_raw = image.raw;
  r.image_consistency = image.normalized;
  r.text_consistency = text.score;
  r.qa_answers = text.yes;
  return r;
}

std::vector<EvalOutcome> EvaluateCases(const std::vector<BenchCase>& cases,
                                       const std::function<Bytes(const BenchCase&)>& generated,
                                       QuestionBank& bank, clients::Clients& clients, int workers,
                                       const std::atomic<bool>* stop) {
  std::vector<std::optional<QuestionSet>> questions(cases.size());
  std::vector<EvalOutcome> out(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) {
    out[i].case_id = cases[i].case_id;
    if (stop != nullptr && stop->load()) break;
    try {
      questions[i] = bank.GetOrFormulate(cases[i], clients);
    } catch (const Error& e) {
      out[i].error = e.what();
    }
  }
  std::function<EvalOutcome(std::size_t)> work = [&](std::size_t i) {
    EvalOutcome o = out[i];
    if (!questions[i]) {
      if (o.error.empty()) o.error = "interrupted";
      return o;
    }
    try {
      o.record = EvaluateCase(cases[i], generated(cases[i]), *questions[i], clients);
    } catch (const Error& e) {
      o.error = e.what();
    }
    return o;
  };
  std::function<void(std::size_t, EvalOutcome&&)> sink = [&](std::size_t i, EvalOutcome&& o) {
    out[i] = std::move(o);
  };
  const std::size_t done = OrderedParallelMap<EvalOutcome>(cases.size(), workers, work, sink, stop);
  for (std::size_t i = done; i < out.size(); ++i) {
    if (!out[i].record && out[i].error.empty()) out[i].error = "interrupted";
  }
  return out;
}

// ---- report -----------------------------------------------------------------

std::string BucketName(int n_objects) {
  static const char* kNames[] = {"Two Obj.", "Three Obj.", "Four Obj.", "Five Obj."};
  if (n_objects < kMinObjects || n_objects > kMaxObjects) return std::to_string(n_objects) + " Obj.";
  return kNames[n_objects - kMinObjects];
}

ReportTable AggregateReport(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::kEmptyInput, "no evaluation records");
  struct Sums {
    std::size_t count = 0;
    double image = 0;
    double text = 0;
  };
  std::map<int, Sums> sums;
  Sums all;
  for (const EvalRecord& r : records) {
    if (r.n_objects < kMinObjects || r.n_objects > kMaxObjects) {
      throw Error(ErrorCode::kInvalidArgument,
                  r.case_id + ": n_objects " + std::to_string(r.n_objects) + " outside 2..5");
    }
    for (Sums* s : {&sums[r.n_objects], &all}) {
      ++s->count;
      s->image += r.image_consistency;
      s->text += r.text_consistency;
    }
  }
  auto cell = [](const Sums& s) {
    const double n = static_cast<double>(s.count);
    return ReportCell{s.count, s.image / n, s.text / n};
  };
  ReportTable table;
  for (const auto& [n, s] : sums) table.buckets[n] = cell(s);
  table.overall = cell(all);
  return table;
}

Json ReportTable::ToJson() const {
  Json rows = Json::array();
  for (const auto& [n, c] : buckets) {
    rows.push_back({{"bucket", BucketName(n)},
                    {"n_objects", n},
                    {"count", c.count},
                    {"image_consistency", c.image_consistency},
                    {"text_consistency", c.text_consistency}});
  }
  return {{"buckets", rows},
          {"overall",
           {{"count", overall.count},
            {"image_consistency", overall.image_consistency},
            {"text_consistency", overall.text_consistency}}}};
}

std::string ReportTable::ToText() const {
  std::vector<std::string> headers = {"Metric"};
  std::vector<const ReportCell*> cells;
  for (const auto& [n, c] : buckets) {
    headers.push_back(BucketName(n));
    cells.push_back(&c);
  }
  headers.push_back("Overall");
  cells.push_back(&overall);

  std::vector<std::vector<std::string>> rows = {headers};
  auto add_row = [&](const std::string& name, auto value) {
    std::vector<std::string> row = {name};
    for (const ReportCell* c : cells) row.push_back(value(*c));
    rows.push_back(std::move(row));
  };
  add_row("Image consistency", [](const ReportCell& c) { return FormatRounded(c.image_consistency); });
  add_row("Text consistency", [](const ReportCell& c) { return FormatRounded(c.text_consistency); });
  add_row("Count", [](const ReportCell& c) { return std::to_string(c.count); });

  std::vector<std::size_t> widths(headers.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
  }
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i == 0) {
        out += row[i] + std::string(widths[i] - row[i].size(), ' ');
      } else {
        out += "  " + std::string(widths[i] - row[i].size(), ' ') + row[i];
      }
    }
    out += '\n';
  }
  return out;
}

std::string FormatRounded(double value, int decimals) {
  if (!std::isfinite(value)) throw Error(ErrorCode::kNonFinite, "cannot format a non-finite value");
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12f", std::fabs(value));
  std::string digits(buf);
  const std::size_t dot = digits.find('.');
  std::string whole = digits.substr(0, dot);
  std::string frac = digits.substr(dot + 1);
  const bool round_up = frac[static_cast<std::size_t>(decimals)] >= '5';
  std::string kept = whole + frac.substr(0, static_cast<std::size_t>(decimals));
  if (round_up) {
    int i = static_cast<int>(kept.size()) - 1;
    while (i >= 0 && kept[static_cast<std::size_t>(i)] == '9') kept[static_cast<std::size_t>(i--)] = '0';
    if (i < 0) {
      kept.insert(kept.begin(), '1');
    } else {
      ++kept[static_cast<std::size_t>(i)];
    }
  }
  const std::size_t whole_len = kept.size() - static_cast<std::size_t>(decimals);
  std::string out = kept.substr(0, whole_len);
  if (decimals > 0) out += "." + kept.substr(whole_len);
  const bool nonzero = out.find_first_not_of("0.") != std::string::npos;
  return (value < 0 && nonzero ? "-" : "") + out;
}

}  // namespace forge::bench
