// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS or FAIL line per primary criterion, mocks only.
// Exit status is the number of failed criteria, capped at 1.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "chi_square.hpp"
#include "forge/benchmark.hpp"
#include "forge/dataset_store.hpp"
#include "forge/error.hpp"
#include "forge/digest.hpp"
#include "forge/guidance.hpp"
#include "forge/image_engine.hpp"
#include "forge/interleave.hpp"
#include "forge/orb.hpp"
#include "forge/review_queue.hpp"
#include "forge/video_engine.hpp"
#include "generators.hpp"
#include "sample_factory.hpp"
#include "temp_dir.hpp"

namespace forge::acceptance {
namespace {

namespace fs = std::filesystem;
using clients::ClientRole;
using clients::Clients;
using clients::Json;
using Clock = std::chrono::steady_clock;

// Collects the first few failures of a criterion.
class Failures {
 public:
  void Add(const std::string& what) {
    if (messages_.size() < 5) messages_.push_back(what);
    ++count_;
  }
  void Check(bool ok, const std::string& what) {
    if (!ok) Add(what);
  }
  bool empty() const { return count_ == 0; }
  std::string Summary() const {
    std::string out = std::to_string(count_) + " failure(s)";
    for (const auto& m : messages_) out += "; " + m;
    return out;
  }

 private:
  std::vector<std::string> messages_;
  std::size_t count_ = 0;
};

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void CheckBudget(Failures& f, Clock::time_point start, double budget) {
  const double took = Seconds(start);
  f.Check(took < budget, "took " + std::to_string(took) + " s, budget " + std::to_string(budget) + " s");
}

fs::path Fixtures() {
  const char* root = std::getenv("FORGE_FIXTURES");
  if (root == nullptr) throw std::runtime_error("FORGE_FIXTURES is not set");
  return root;
}

Json ReadJson(const fs::path& p) {
  const Bytes raw = ReadFileBytes(p.string());
  return Json::parse(raw.begin(), raw.end());
}

// Serves a transcript and counts calls per role.
class CountingTransport : public clients::Transport {
 public:
  explicit CountingTransport(clients::MockTranscript t) : inner_(std::move(t)) {}
  clients::TransportResult Post(ClientRole role, const clients::ServiceEndpoint& ep,
                                const std::string& body) override {
    {
      std::lock_guard lock(mu_);
      ++calls_[role];
    }
    return inner_.Post(role, ep, body);
  }
  int Calls(ClientRole role) {
    std::lock_guard lock(mu_);
    return calls_[role];
  }

 private:
  clients::MockTransport inner_;
  std::mutex mu_;
  std::map<ClientRole, int> calls_;
};

// ---- guidance ---------------------------------------------------------------

using guidance::ConditionSet;
using guidance::Denoiser;
using guidance::GuidanceConfig;
using guidance::Prediction;

// Returns a fixed prediction per condition pair, independent of z and t.
Denoiser Constant(const Prediction& null_null, const Prediction& null_text, const Prediction& full) {
  return [=](std::span<const double>, const ConditionSet& c, double) {
    return !c.visual ? null_null : (c.text ? full : null_text);
  };
}

// Written out from the expanded formula, not from the library.
double ClosedForm(double a, double b, double c, double s1, double s2) {
  return (1 - s2) * a + s2 * (1 - s1) * b + s2 * s1 * c;
}

std::string GuidanceAlgebra() {
  Failures f;
  const auto start = Clock::now();
  Rng rng(1001);
  auto vec = [&](std::size_t n) {
    Prediction p;
    for (std::size_t i = 0; i < n; ++i) p.values.push_back(rng.Uniform01() * 20 - 10);
    return p;
  };
  // Relative to the magnitude of the operands times the gains applied.
  auto within = [](double got, double want, double a, double b, double c, double s1, double s2,
                   double tol) {
    const double m = std::max({std::abs(a), std::abs(b), std::abs(c), 1e-300});
    return std::abs(got - want) <= tol * m * (1 + std::abs(s1)) * (1 + std::abs(s2));
  };
  auto run = [&](double s1, double s2, double tol, const std::string& tag) {
    const std::size_t n = 1 + rng.Below(32);
    const Prediction a = vec(n), b = vec(n), c = vec(n);
    GuidanceConfig cfg;
    cfg.s1 = s1;
    cfg.s2 = s2;
    const Prediction out =
        guidance::GuidedStep(Constant(a, b, c), std::vector<double>(n, 0.0), "t", "v", 0.5, cfg);
    for (std::size_t i = 0; i < n; ++i) {
      const double want = ClosedForm(a.values[i], b.values[i], c.values[i], s1, s2);
      f.Check(within(out.values[i], want, a.values[i], b.values[i], c.values[i], s1, s2, tol),
              tag + " s1=" + std::to_string(s1) + " s2=" + std::to_string(s2));
    }
  };
  for (int trial = 0; trial < 1000; ++trial) run(rng.Uniform01() * 8, rng.Uniform01() * 4, 1e-12, "affine");
  for (int trial = 0; trial < 100; ++trial) {
    run(1.0, rng.Uniform01() * 4, 1e-15, "s1=1");
    run(rng.Uniform01() * 8, 1.0, 1e-15, "s2=1");
    run(rng.Uniform01() * 8, 0.0, 1e-15, "s2=0");
  }
  GuidanceConfig worked;
  worked.s1 = 4.0;
  worked.s2 = 1.5;
  const Prediction out = guidance::GuidedStep(Constant({{0.0}}, {{1.0}}, {{2.0}}), std::vector<double>{0.0},
                                              "t", "v", 0.5, worked);
  f.Check(out.values == std::vector<double>{7.5}, "worked fixture gave " + std::to_string(out.values[0]));
  CheckBudget(f, start, 1.0);
  return f.empty() ? "" : f.Summary();
}

std::string Schedule() {
  Failures f;
  for (int n = 1; n <= 1000; ++n) {
    std::vector<double> uniform;
    for (int i = n; i >= 1; --i) uniform.push_back(static_cast<double>(i) / n);
    f.Check(guidance::ShiftedSchedule(n, 1.0) == uniform, "shift 1 differs at n=" + std::to_string(n));
  }
  f.Check(guidance::ShiftedSchedule(2, 3.0) == std::vector<double>{1.0, 0.75}, "shift 3, n=2");
  return f.empty() ? "" : f.Summary();
}

// ---- instruction format -----------------------------------------------------

std::string ParserRoundTrip() {
  Failures f;
  const auto start = Clock::now();
  Rng rng(424242);
  for (int trial = 0; trial < 10000; ++trial) {
    const InterleavedInstruction x = testing::RandomInstruction(rng);
    const std::string text = RenderTemplate(x);
    f.Check(ParseTemplate(text) == x, "parse(render(x)) != x for \"" + text + "\"");
    f.Check(RenderTemplate(ParseTemplate(text)) == text, "render(parse(s)) != s for \"" + text + "\"");
  }
  f.Check(ParseTemplate("A [Image1] robot holds a [Image2] flower vase").slot_count() == 2,
          "example does not parse to two slots");
  CheckBudget(f, start, 5.0);
  return f.empty() ? "" : f.Summary();
}

// ---- image pipeline ---------------------------------------------------------

std::map<std::string, Bytes> Tree(const fs::path& root) {
  std::map<std::string, Bytes> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = ReadFileBytes(e.path().string());
  }
  return out;
}

std::string ImagePipeline() {
  Failures f;
  const auto start = Clock::now();
  const fs::path fx = Fixtures() / "image";
  const auto items = image::ListCorpus(fx / "corpus");
  f.Check(items.size() == 50, "corpus has " + std::to_string(items.size()) + " images");
  const auto transcript = clients::MockTranscript::Load((fx / "transcript.json").string());
  image::ImageEngineConfig config;
  config.rng_seed = ReadJson(fx / "fixture.json")["seed"].get<std::uint64_t>();

  testing::TempDir tmp("accept-image");
  std::vector<std::map<std::string, Bytes>> trees;
  for (int workers : {4, 1}) {
    const fs::path out = tmp.path() / ("run" + std::to_string(workers));
    Clients clients = Clients::Mock(std::make_shared<clients::MockTransport>(transcript));
    store::ShardWriter writer(out);
    const image::CorpusStats stats = image::RunImageCorpus(items, clients, config, writer, nullptr, workers);
    writer.Commit();
    f.Check(stats.failed == 0, std::to_string(stats.failed) + " items failed");
    const auto samples = store::ReadAll(out);
    f.Check(!samples.empty() && samples.size() == stats.accepted, "accepted count does not match shards");
    for (const auto& s : samples) {
      f.Check(s.assets.size() >= 3 && s.assets.size() <= 8,
              s.sample_id + " has " + std::to_string(s.assets.size()) + " assets");
      const auto report = ValidateMapping(s.instruction, s.mapping);
      f.Check(report.ok(), s.sample_id + " has mapping violations");
    }
    trees.push_back(Tree(out));
  }
  f.Check(trees[0] == trees[1], "two runs with the same seed wrote different bytes");
  CheckBudget(f, start, 30.0);
  return f.empty() ? "" : f.Summary();
}

// ---- video pipeline ---------------------------------------------------------

const video::Frame* FrameAt(const video::FrameSequence& seq, double t) {
  for (const auto& fr : seq.frames) {
    if (fr.time == t) return &fr;
  }
  return nullptr;
}

std::string VideoPipeline() {
  Failures f;
  const fs::path fx = Fixtures() / "video";
  const auto transcript = clients::MockTranscript::Load((fx / "transcript.json").string());
  video::VideoEngineConfig config;
  config.rng_seed = ReadJson(fx / "fixture.json")["seed"].get<std::uint64_t>();

  std::size_t accepted = 0;
  bool saw_identical = false;
  for (const fs::path& dir : video::ListVideos(fx / "videos")) {
    const video::FrameSequence seq = video::LoadFrameSequence(dir);
    auto transport = std::make_shared<CountingTransport>(transcript);
    Clients clients = Clients::Mock(transport);
    std::vector<video::PairOutcome> outcomes;
    try {
      outcomes = video::ProcessVideo(seq, clients, config);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoValidPairs) f.Add(dir.filename().string() + ": " + e.what());
      continue;
    }
    bool all_identical = true;
    for (const auto& o : outcomes) {
      const video::Frame* src = FrameAt(seq, o.source_time);
      const video::Frame* dst = FrameAt(seq, o.target_time);
      f.Check(src != nullptr && dst != nullptr, "pair times are not frame times");
      if (src == nullptr || dst == nullptr) continue;
      all_identical = all_identical && src->png == dst->png;
      if (!o.sample) continue;
      ++accepted;
      const InterleavedSample& s = *o.sample;
      f.Check(s.target_image == dst->png, s.sample_id + ": target is not the target frame");
      for (const auto& a : s.assets) {
        f.Check(a.source == AssetSource::kSourceFrameCrop && a.bbox.has_value() &&
                    DecodePng(a.image_bytes) == Crop(src->image, *a.bbox),
                s.sample_id + ": asset is not a crop of the source frame");
      }
    }
    if (!outcomes.empty() && all_identical) {
      saw_identical = true;
      for (const auto& o : outcomes) {
        f.Check(!o.sample && o.status == "rejected", "identical pair was kept");
        for (const auto& d : o.decisions) {
          f.Check(d.verdict == video::FilterVerdict::kStatic && !d.verifier_called,
                  "identical pair passed the ORB stage");
        }
      }
      f.Check(transport->Calls(ClientRole::kChangeVerifier) == 0, "verifier called on identical frames");
    }
  }
  f.Check(saw_identical, "no identical-frame clip in the fixture");
  f.Check(accepted > 0, "no video sample accepted");

  const fs::path orb_dir = Fixtures() / "orb";
  const Json oracle = ReadJson(orb_dir / "oracle.json");
  std::size_t scored = 0;
  for (const auto& pair : oracle["pairs"]) {
    const std::string kind = pair["kind"];
    if (kind != "translated" && kind != "rotated") continue;
    const Raster a = DecodePng(ReadFileBytes((orb_dir / pair["a"].get<std::string>()).string()));
    const Raster b = DecodePng(ReadFileBytes((orb_dir / pair["b"].get<std::string>()).string()));
    const double got = orb::OrbSimilarity(a, b, orb::OrbConfig{}).score;
    const double want = pair["score"].get<double>();
    ++scored;
    f.Check(std::abs(got - want) <= 0.1, pair["a"].get<std::string>() + " vs " +
                                            pair["b"].get<std::string>() + ": " + std::to_string(got) +
                                            " against " + std::to_string(want));
  }
  f.Check(scored >= 6, "oracle has too few textured pairs");
  return f.empty() ? "" : f.Summary();
}

// ---- evaluation -------------------------------------------------------------

std::vector<bench::EvalRecord> Bucketed(const std::vector<std::tuple<int, int, double>>& spec) {
  std::vector<bench::EvalRecord> out;
  for (const auto& [n, count, mean] : spec) {
    for (int i = 0; i < count; ++i) {
      bench::EvalRecord r;
      r.case_id = "c" + std::to_string(n) + "-" + std::to_string(i);
      r.n_objects = n;
      r.image_consistency = mean;
      r.text_consistency = mean;
      out.push_back(r);
    }
  }
  return out;
}

std::vector<std::string> RowCells(const std::string& table, const std::string& row) {
  std::istringstream lines(table);
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind(row, 0) != 0) continue;
    std::istringstream cells(line.substr(row.size()));
    return {std::istream_iterator<std::string>(cells), {}};
  }
  return {};
}

std::string EvaluationProtocol() {
  Failures f;
  const double normalized[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (int r = 1; r <= 5; ++r) {
    f.Check(bench::NormalizeRating(r) == normalized[r - 1], "rating " + std::to_string(r));
  }

  Rng rng(555);
  const Bytes generated = testing::TinyPng(5, 8, 8);
  for (int trial = 0; trial < 200; ++trial) {
    bench::QuestionSet qs{"case", {}};
    std::map<std::string, bool> truth;
    int yes = 0;
    const int n = static_cast<int>(rng.Between(1, 12));
    for (int i = 0; i < n; ++i) {
      const std::string q = "Is claim " + std::to_string(i) + " true?";
      qs.questions.push_back({q, "attribute", 1});
      truth[q] = rng.Below(2) == 0;
      yes += truth[q];
    }
    Clients answerer = Clients::Mock(std::make_shared<clients::RecordingTransport>(
        [truth](ClientRole, const Json& req) -> Json {
          const std::string q = req["question"];
          for (const auto& [text, v] : truth) {
            if (q.rfind(text, 0) == 0) return {{"answer", v ? "Yes." : "no"}};
          }
          return {{"answer", "unsure"}};
        }));
    const double got = bench::ScoreTextConsistency(generated, qs, answerer).score;
    f.Check(got == static_cast<double>(yes) / n, "text score is not the yes-ratio");
  }

  const auto equal = bench::AggregateReport(Bucketed({{2, 50, 0.93}, {3, 50, 0.94}, {4, 50, 0.90}, {5, 50, 0.94}}));
  const auto equal_row = RowCells(equal.ToText(), "Image consistency");
  f.Check(!equal_row.empty() && equal_row.back() == "0.93", "equal buckets do not print Overall 0.93");
  const auto weighted = bench::AggregateReport(Bucketed({{2, 10, 0.8}, {3, 10, 0.8}, {4, 10, 0.8}, {5, 30, 0.4}}));
  const auto weighted_row = RowCells(weighted.ToText(), "Text consistency");
  f.Check(!weighted_row.empty() && weighted_row.back() == "0.60", "weighted fixture does not print 0.60");

  for (int trial = 0; trial < 200; ++trial) {
    std::vector<bench::EvalRecord> records;
    const int n = static_cast<int>(rng.Between(1, 400));
    for (int i = 0; i < n; ++i) {
      bench::EvalRecord r;
      r.n_objects = static_cast<int>(rng.Between(2, 5));
      r.image_consistency = static_cast<double>(rng.Between(0, 4)) / 4;
      const int q = static_cast<int>(rng.Between(1, 9));
      r.text_consistency = static_cast<double>(rng.Between(0, q)) / q;
      records.push_back(r);
    }
    const auto t = bench::AggregateReport(records);
    long double image = 0, text = 0;
    for (auto it = records.rbegin(); it != records.rend(); ++it) {
      image += it->image_consistency;
      text += it->text_consistency;
    }
    f.Check(std::abs(t.overall.image_consistency - static_cast<double>(image / n)) <= 1e-12 &&
                std::abs(t.overall.text_consistency - static_cast<double>(text / n)) <= 1e-12,
            "aggregate differs from the brute-force mean");
  }
  return f.empty() ? "" : f.Summary();
}

// ---- training mix -----------------------------------------------------------

std::map<std::string, std::unique_ptr<store::SampleSource>> MixSources() {
  std::map<std::string, std::unique_ptr<store::SampleSource>> out;
  Rng rng(12);
  int id = 0;
  for (const char* name : {"image", "video", "edit", "t2i"}) {
    std::vector<InterleavedSample> v;
    for (int i = 0; i < 3; ++i) v.push_back(testing::MakeSample(rng, id++, 3));
    out[name] = std::make_unique<store::VectorSource>(std::move(v));
  }
  return out;
}

std::string MixSampler() {
  Failures f;
  const auto start = Clock::now();
  const store::MixSpec spec{{{"image", 0.2}, {"video", 0.2}, {"edit", 0.1}, {"t2i", 0.5}}, 2026};
  const std::vector<double> p = {0.2, 0.2, 0.1, 0.5};
  constexpr int kDraws = 100000;
  store::MixStream first(MixSources(), spec), second(MixSources(), spec);
  std::map<std::string, std::size_t> index;
  for (std::size_t k = 0; k < spec.sources.size(); ++k) index[spec.sources[k].first] = k;
  std::vector<std::size_t> counts(4, 0);
  bool same = true;
  for (int i = 0; i < kDraws; ++i) {
    const auto a = first.Next();
    const auto b = second.Next();
    same = same && a.first == b.first && a.second.sample_id == b.second.sample_id;
    ++counts[index.at(a.first)];
  }
  f.Check(same, "two streams with one seed diverged");
  for (std::size_t k = 0; k < 4; ++k) {
    const double share = static_cast<double>(counts[k]) / kDraws;
    f.Check(std::abs(share - p[k]) <= 0.005, spec.sources[k].first + " share " + std::to_string(share));
  }
  const double pvalue = testing::ChiSquareSurvival3(testing::ChiSquare(counts, p));
  f.Check(pvalue > 0.01, "chi-square p = " + std::to_string(pvalue));
  // Any single seed lands below 0.01 one time in a hundred; across 50 seeds
  // five or more such tails would put the sampler itself in doubt.
  int tails = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    store::MixStream stream(MixSources(), {spec.sources, seed});
    std::vector<std::size_t> c(4, 0);
    for (int i = 0; i < kDraws; ++i) ++c[stream.DrawSource()];
    tails += testing::ChiSquareSurvival3(testing::ChiSquare(c, p)) <= 0.01;
  }
  f.Check(tails < 5, std::to_string(tails) + " of 50 seeds fall in the 1% tail");
  CheckBudget(f, start, 5.0);
  return f.empty() ? "" : f.Summary();
}

// ---- store ------------------------------------------------------------------

bool ThrowsCode(const std::function<void()>& fn, ErrorCode code) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

std::string Store() {
  Failures f;
  Rng rng(31);
  std::vector<InterleavedSample> samples;
  for (int i = 0; i < 1000; ++i) {
    samples.push_back(testing::MakeSample(rng, i, 3 + static_cast<int>(rng.Below(6)),
                                          i % 4 == 0 ? Provenance::kVideoPipeline : Provenance::kImagePipeline));
  }
  testing::TempDir dir("accept-store");
  const fs::path ok = dir.path() / "ok";
  store::WriteShards(samples, ok, {.max_records_per_shard = 128});
  const auto back = store::ReadAll(ok);
  f.Check(back.size() == samples.size(), "read back " + std::to_string(back.size()) + " samples");
  for (std::size_t i = 0; i < std::min(back.size(), samples.size()); ++i) {
    f.Check(back[i] == samples[i] && store::SerializeRecord(back[i]) == store::SerializeRecord(samples[i]),
            "sample " + std::to_string(i) + " differs");
  }

  const auto manifest = store::LoadManifest(ok);
  const fs::path shard = ok / manifest.shards[3].path;
  Bytes raw = ReadFileBytes(shard.string());
  raw[raw.size() / 3] ^= 0x20;
  WriteFileAtomic(shard.string(), raw);
  f.Check(ThrowsCode([&] { store::ReadAll(ok); }, ErrorCode::kDigestMismatch), "corrupted shard was read");

  const fs::path blobbed = dir.path() / "blob";
  store::WriteShards(std::vector<InterleavedSample>(samples.begin(), samples.begin() + 5), blobbed);
  const fs::path blob = blobbed / "blobs" / (Sha256Hex(samples[0].assets[0].image_bytes) + ".png");
  Bytes png = ReadFileBytes(blob.string());
  png[png.size() / 2] ^= 0x01;
  WriteFileAtomic(blob.string(), png);
  f.Check(ThrowsCode([&] { store::ReadAll(blobbed); }, ErrorCode::kDigestMismatch), "corrupted blob was read");

  struct Interrupted {};
  const fs::path cut = dir.path() / "cut";
  bool interrupted = false;
  try {
    store::WriteShards(samples, cut, {.before_commit = [] { throw Interrupted{}; }});
  } catch (const Interrupted&) {
    interrupted = true;
  }
  f.Check(interrupted, "interruption hook did not fire");
  f.Check(!fs::exists(cut / store::kManifestName), "interrupted write left a manifest");
  f.Check(ThrowsCode([&] { store::ReadAll(cut); }, ErrorCode::kManifestNotFound),
          "interrupted write is readable");
  return f.empty() ? "" : f.Summary();
}

// ---- review -----------------------------------------------------------------

bench::BenchCase ReviewCase(int id) {
  bench::BenchCase c;
  c.case_id = "case-" + std::to_string(id);
  c.entity_ids = {"e" + std::to_string(id), "f" + std::to_string(id)};
  for (int k = 0; k < 2; ++k) {
    VisualAsset a;
    a.image_bytes = testing::TinyPng(static_cast<std::uint64_t>(id * 2 + k), 8, 8);
    a.origin_ref = c.entity_ids[static_cast<std::size_t>(k)];
    c.references.push_back(std::move(a));
  }
  c.instruction = ParseTemplate("A [Image1] cat sits beside a [Image2] lamp.");
  c.mapping.entries = {{"cat", 1}, {"lamp", 2}};
  c.n_objects = 2;
  return c;
}

std::string ReviewStateMachine() {
  Failures f;
  for (std::uint64_t round = 0; round < 8; ++round) {
    testing::TempDir dir("accept-review");
    constexpr int kCases = 40;
    bench::ReviewQueue q(dir.path(), {std::chrono::seconds(1), nullptr});
    for (int i = 0; i < kCases; ++i) q.AddCase(ReviewCase(i));
    std::atomic<int> decided{0}, evaluated_non_accepted{0}, model_calls{0}, unexpected{0};
    Clients evaluator = Clients::Mock(std::make_shared<clients::RecordingTransport>(
        [&](ClientRole, const Json&) -> Json {
          ++model_calls;
          return {};
        }));
    std::vector<std::thread> threads;
    for (int t = 0; t < 6; ++t) {
      threads.emplace_back([&, t] {
        Rng rng(DeriveSeed(round, "reviewer" + std::to_string(t)));
        const std::string me = "r" + std::to_string(t);
        for (int step = 0; step < 150; ++step) {
          std::string id;
          if (rng.Below(2) == 0) {
            const auto c = q.Next(me);
            if (!c) continue;
            id = c->case_id;
          } else {
            id = "case-" + std::to_string(rng.Below(kCases));
          }
          try {
            q.Decide(id, {rng.Below(3) != 0, "reason " + me}, me);
            ++decided;
          } catch (const Error& e) {
            if (e.code() != ErrorCode::kAlreadyDecided && e.code() != ErrorCode::kLeaseConflict) ++unexpected;
          }
          const auto probe = q.Find("case-" + std::to_string(rng.Below(kCases)));
          if (probe && probe->review_state != bench::ReviewState::kAccepted) {
            try {
              bench::EvaluateCase(*probe, {}, {}, evaluator);
              ++evaluated_non_accepted;
            } catch (const Error& e) {
              if (e.code() != ErrorCode::kNotAccepted) ++evaluated_non_accepted;
            }
          }
        }
      });
    }
    for (auto& th : threads) th.join();

    f.Check(unexpected == 0, "unexpected decide error");
    f.Check(evaluated_non_accepted == 0 && model_calls == 0, "a non-accepted case was evaluated");
    std::ifstream in(dir.path() / "decisions.ndjson");
    std::set<std::string> ids;
    int lines = 0;
    for (std::string line; std::getline(in, line); ++lines) {
      f.Check(ids.insert(Json::parse(line)["case_id"].get<std::string>()).second, "case decided twice");
    }
    f.Check(lines == decided, "decision log does not match successful decisions");
    const bench::ReviewStats s = q.Stats();
    f.Check(s.accepted + s.rejected == static_cast<std::size_t>(lines), "stats disagree with the log");
    f.Check(bench::ReviewQueue(dir.path()).Stats() == s, "reopened queue disagrees");
  }
  return f.empty() ? "" : f.Summary();
}

struct Criterion {
  const char* name;
  std::string (*run)();
};

int Main() {
  const Criterion criteria[] = {
      {"guidance algebra", GuidanceAlgebra},
      {"timestep schedule", Schedule},
      {"parser round trip", ParserRoundTrip},
      {"image pipeline", ImagePipeline},
      {"video pipeline", VideoPipeline},
      {"evaluation protocol", EvaluationProtocol},
      {"mix sampler", MixSampler},
      {"dataset store", Store},
      {"review state machine", ReviewStateMachine},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = Clock::now();
    std::string problem;
    try {
      problem = c.run();
    } catch (const std::exception& e) {
      problem = std::string("exception: ") + e.what();
    }
    char took[32];
    std::snprintf(took, sizeof(took), "%.2f s", Seconds(start));
    if (problem.empty()) {
      std::cout << "PASS " << c.name << " (" << took << ")\n";
    } else {
      ++failed;
      std::cout << "FAIL " << c.name << " (" << took << "): " << problem << "\n";
    }
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << "\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace forge::acceptance

int main() { return forge::acceptance::Main(); }
