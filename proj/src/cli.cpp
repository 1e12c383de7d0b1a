// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/cli.hpp"

#include <httplib.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include "forge/benchmark.hpp"
#include "forge/dataset_store.hpp"
#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/guidance.hpp"
#include "forge/image_engine.hpp"
#include "forge/review_queue.hpp"
#include "forge/review_server.hpp"
#include "forge/video_engine.hpp"

namespace forge::cli {
namespace fs = std::filesystem;
using clients::ClientRole;
using clients::Json;

std::atomic<bool>& StopFlag() {
  static std::atomic<bool> flag{false};
  return flag;
}

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One JSON object per line on the error stream.
class Log {
 public:
  explicit Log(std::ostream& err)
      : logger_("forge", std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true)) {
    logger_.set_pattern(R"({"time":"%Y-%m-%dT%H:%M:%S.%eZ","level":"%l",%v})",
                        spdlog::pattern_time_type::utc);
    logger_.set_level(spdlog::level::info);
  }

  void Info(const std::string& event, const Json& fields = Json::object()) {
    Emit(spdlog::level::info, event, fields);
  }
  void Warn(const std::string& event, const Json& fields = Json::object()) {
    Emit(spdlog::level::warn, event, fields);
  }
  void Fail(const std::string& event, const Json& fields = Json::object()) {
    Emit(spdlog::level::err, event, fields);
  }

 private:
  void Emit(spdlog::level::level_enum level, const std::string& event, const Json& fields) {
    Json j = {{"event", event}};
    for (auto it = fields.begin(); it != fields.end(); ++it) j[it.key()] = it.value();
    const std::string body = j.dump();
    logger_.log(level, "{}", body.substr(1, body.size() - 2));
  }

  spdlog::logger logger_;
};

struct Shared {
  std::string config_file;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string mock;
  std::vector<std::string> endpoints;
  bool dry_run = false;
};

struct Context {
  std::ostream& out;
  Log& log;
  const Shared& shared;
  config::RunConfig rc;
};

const std::vector<ClientRole> kImageRoles = {ClientRole::kCaptioner, ClientRole::kDetector,
                                             ClientRole::kSegmenter, ClientRole::kRegionDescriber,
                                             ClientRole::kInstructionWriter};
const std::vector<ClientRole> kVideoRoles = {ClientRole::kCorrespondenceVlm,
                                             ClientRole::kChangeVerifier, ClientRole::kCaptioner,
                                             ClientRole::kRegionDescriber,
                                             ClientRole::kInstructionWriter};
const std::vector<ClientRole> kCurateRoles = {ClientRole::kQaAnswerer,
                                              ClientRole::kInstructionWriter};
const std::vector<ClientRole> kEvalRoles = {ClientRole::kJudge, ClientRole::kQaAnswerer,
                                            ClientRole::kQuestionWriter};

clients::Clients MakeClients(const Context& ctx, const std::vector<ClientRole>& roles) {
  clients::ClientOptions options;
  options.jitter_seed = ctx.rc.seed;
  if (!ctx.shared.mock.empty()) {
    clients::MockTranscript transcript;
    try {
      transcript = clients::MockTranscript::Load(ctx.shared.mock);
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfigError, "--mock: " + e.detail());
    }
    return clients::Clients::Mock(std::make_shared<clients::MockTransport>(std::move(transcript)),
                                  options);
  }
  std::map<ClientRole, clients::ServiceEndpoint> endpoints;
  for (ClientRole role : roles) {
    auto it = ctx.rc.endpoints.find(role);
    const std::string name(clients::RoleName(role));
    if (it == ctx.rc.endpoints.end() || it->second.base_url.empty()) {
      throw Error(ErrorCode::kConfigError, "no endpoint for " + name + "; set endpoints." + name +
                                               ".url, " + config::EnvPrefix(role) +
                                               "_URL, --endpoint " + name + "=URL or use --mock");
    }
    endpoints[role] = it->second;
  }
  return clients::Clients(std::move(endpoints), std::make_shared<clients::HttpTransport>(),
                          options);
}

// Empty when the endpoint answered with any HTTP status.
std::string Unreachable(const clients::ServiceEndpoint& ep) {
  const std::size_t scheme = ep.base_url.find("://");
  const std::size_t slash = ep.base_url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  const std::string origin = ep.base_url.substr(0, slash);
  const std::string path = slash == std::string::npos ? "/" : ep.base_url.substr(slash);
  httplib::Client client(origin);
  if (!client.is_valid()) return "invalid url";
  client.set_connection_timeout(3);
  client.set_read_timeout(3);
  auto res = client.Get(path);
  return res ? "" : httplib::to_string(res.error());
}

int DryRun(Context& ctx, const std::vector<ClientRole>& roles, Json extra) {
  bool ok = true;
  Json status = Json::object();
  for (ClientRole role : roles) {
    const std::string name(clients::RoleName(role));
    if (!ctx.shared.mock.empty()) {
      status[name] = "mock";
      continue;
    }
    const std::string problem = Unreachable(ctx.rc.endpoints.at(role));
    status[name] = problem.empty() ? "reachable" : "unreachable: " + problem;
    ok = ok && problem.empty();
  }
  extra["dry_run"] = true;
  extra["roles"] = status;
  ctx.out << extra.dump() << "\n";
  ctx.log.Info("dry_run", {{"ok", ok}});
  return ok ? kExitOk : kExitFailure;
}

void PrepareOutput(const fs::path& out, bool force) {
  if (!fs::exists(out / store::kManifestName)) return;
  if (!force) {
    throw Error(ErrorCode::kIoFailure,
                out.string() + " already holds a dataset; pass --force to replace it");
  }
  fs::remove_all(out);
}

void WriteOrPrint(Context& ctx, const std::string& path, const std::string& text) {
  if (path.empty()) {
    ctx.out << text;
  } else {
    WriteFileAtomic(path, text);
  }
}

// ---- image / video ----------------------------------------------------------

struct ImageArgs {
  std::string corpus;
  std::string out;
  bool force = false;
};

int RunImage(Context& ctx, const ImageArgs& a) {
  const auto items = image::ListCorpus(a.corpus);
  clients::Clients clients = MakeClients(ctx, kImageRoles);
  if (ctx.shared.dry_run) return DryRun(ctx, kImageRoles, {{"items", items.size()}});
  PrepareOutput(a.out, a.force);
  store::ShardWriter writer(a.out);
  std::ostringstream audit;
  ctx.log.Info("image.start", {{"items", items.size()}, {"workers", ctx.rc.workers}});
  const image::CorpusStats stats = image::RunImageCorpus(items, clients, ctx.rc.image, writer,
                                                         &audit, ctx.rc.workers, &StopFlag());
  const store::ShardManifest manifest = writer.Commit();
  WriteFileAtomic((fs::path(a.out) / "audit.ndjson").string(), audit.str());
  const Json summary = {{"items", stats.items},       {"accepted", stats.accepted},
                        {"rejected", stats.rejected}, {"failed", stats.failed},
                        {"interrupted", stats.interrupted},
                        {"shards", manifest.shards.size()}, {"out", a.out}};
  ctx.out << summary.dump() << "\n";
  ctx.log.Info("image.done", summary);
  return stats.interrupted || stats.failed > 0 ? kExitFailure : kExitOk;
}

struct VideoArgs {
  std::string videos;
  std::string out;
  bool force = false;
};

int RunVideo(Context& ctx, const VideoArgs& a) {
  const auto videos = video::ListVideos(a.videos);
  clients::Clients clients = MakeClients(ctx, kVideoRoles);
  if (ctx.shared.dry_run) return DryRun(ctx, kVideoRoles, {{"videos", videos.size()}});
  PrepareOutput(a.out, a.force);
  store::ShardWriter writer(a.out);
  std::ostringstream audit;
  ctx.log.Info("video.start", {{"videos", videos.size()}, {"workers", ctx.rc.workers}});
  const video::VideoCorpusStats stats = video::RunVideoCorpus(
      videos, clients, ctx.rc.video, writer, &audit, ctx.rc.workers, &StopFlag());
  const store::ShardManifest manifest = writer.Commit();
  WriteFileAtomic((fs::path(a.out) / "audit.ndjson").string(), audit.str());
  const Json summary = {{"videos", stats.videos},
                        {"failed_videos", stats.failed_videos},
                        {"pairs", stats.pairs},
                        {"accepted", stats.accepted},
                        {"rejected", stats.rejected},
                        {"failed", stats.failed},
                        {"interrupted", stats.interrupted},
                        {"shards", manifest.shards.size()},
                        {"out", a.out}};
  ctx.out << summary.dump() << "\n";
  ctx.log.Info("video.done", summary);
  return stats.interrupted || stats.failed > 0 ? kExitFailure : kExitOk;
}

// ---- bench ------------------------------------------------------------------

struct CurateArgs {
  std::string pool;
  std::string queue;
  int count = 12;
};

int RunCurate(Context& ctx, const CurateArgs& a) {
  const auto pool = bench::LoadEntityPool(a.pool);
  clients::Clients clients = MakeClients(ctx, kCurateRoles);
  if (ctx.shared.dry_run) return DryRun(ctx, kCurateRoles, {{"entities", pool.size()}});
  const bench::CurateBatch batch = bench::CurateCases(pool, a.count, ctx.rc.seed, clients, ctx.rc.bench);
  bench::ReviewQueue queue(a.queue);
  Json ids = Json::array();
  for (const bench::BenchCase& c : batch.cases) {
    queue.AddCase(c);
    ids.push_back(c.case_id);
  }
  const bench::ReviewStats s = queue.Stats();
  const Json summary = {{"curated", batch.cases.size()},
                        {"requested", a.count},
                        {"incompatible", batch.incompatible},
                        {"duplicates", batch.duplicates},
                        {"case_ids", ids},
                        {"queue", {{"pending", s.pending}, {"accepted", s.accepted}, {"rejected", s.rejected}}}};
  ctx.out << summary.dump() << "\n";
  if (static_cast<int>(batch.cases.size()) < a.count) {
    ctx.log.Warn("curate.short", {{"curated", batch.cases.size()}, {"requested", a.count}});
  }
  ctx.log.Info("curate.done", summary);
  return batch.cases.empty() ? kExitFailure : kExitOk;
}

struct ServeArgs {
  std::string queue;
  std::string host = "127.0.0.1";
  int port = 8080;
};

int RunServe(Context& ctx, const ServeArgs& a) {
  if (ctx.shared.dry_run) {
    ctx.out << Json{{"dry_run", true}, {"queue", a.queue}}.dump() << "\n";
    return kExitOk;
  }
  bench::ReviewQueue queue(a.queue);
  bench::ReviewServer server(queue);
  const int port = server.Start(a.host, a.port);
  const std::string url = "http://" + a.host + ":" + std::to_string(port);
  ctx.out << Json{{"listening", url}}.dump() << "\n" << std::flush;
  ctx.log.Info("review.listening", {{"url", url}});
  while (!StopFlag().load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.Stop();
  const bench::ReviewStats s = queue.Stats();
  ctx.log.Info("review.stopped",
               {{"pending", s.pending}, {"accepted", s.accepted}, {"rejected", s.rejected}});
  return kExitOk;
}

struct EvalArgs {
  std::string queue;
  std::string generated;
  std::string questions;
  std::string out;
};

int RunEval(Context& ctx, const EvalArgs& a) {
  if (!fs::is_directory(a.queue)) throw Error(ErrorCode::kIoFailure, a.queue + " not found");
  bench::ReviewQueue queue(a.queue);
  const std::vector<bench::BenchCase> accepted = queue.Accepted();
  clients::Clients clients = MakeClients(ctx, kEvalRoles);
  if (ctx.shared.dry_run) return DryRun(ctx, kEvalRoles, {{"accepted", accepted.size()}});
  const bench::ReviewStats s = queue.Stats();
  ctx.log.Info("eval.start", {{"accepted", s.accepted},
                              {"skipped_pending", s.pending},
                              {"skipped_rejected", s.rejected}});
  bench::QuestionBank bank(a.questions.empty() ? fs::path(a.queue) / "questions.ndjson"
                                               : fs::path(a.questions));
  const auto outcomes = bench::EvaluateCases(
      accepted,
      [&](const bench::BenchCase& c) {
        return ReadFileBytes((fs::path(a.generated) / (c.case_id + ".png")).string());
      },
      bank, clients, ctx.rc.workers, &StopFlag());
  std::string lines;
  std::size_t failed = 0;
  for (const auto& o : outcomes) {
    if (o.record) {
      lines += o.record->ToJson().dump() + "\n";
    } else {
      ++failed;
      ctx.log.Warn("eval.case_failed", {{"case_id", o.case_id}, {"error", o.error}});
    }
  }
  WriteOrPrint(ctx, a.out, lines);
  ctx.log.Info("eval.done", {{"evaluated", outcomes.size() - failed}, {"failed", failed}});
  return failed > 0 ? kExitFailure : kExitOk;
}

struct ReportArgs {
  std::string records;
  std::string out;
};

std::vector<bench::EvalRecord> ReadRecords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path);
  std::vector<bench::EvalRecord> records;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (line.empty()) continue;
    try {
      records.push_back(bench::EvalRecord::FromJson(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kDecodeFailure, path + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return records;
}

int RunReport(Context& ctx, const ReportArgs& a) {
  const auto records = ReadRecords(a.records);
  if (ctx.shared.dry_run) {
    ctx.out << Json{{"dry_run", true}, {"records", records.size()}}.dump() << "\n";
    return kExitOk;
  }
  const bench::ReportTable table = bench::AggregateReport(records);
  ctx.out << table.ToText();
  if (!a.out.empty()) WriteFileAtomic(a.out, table.ToJson().dump(2) + "\n");
  ctx.log.Info("report.done", {{"records", records.size()}});
  return kExitOk;
}

// ---- mix --------------------------------------------------------------------

struct MixArgs {
  std::vector<std::string> sources;
  long long draws = 1000;
  std::string out;
};

std::vector<config::MixSourceConfig> ParseSources(const std::vector<std::string>& flags) {
  std::vector<config::MixSourceConfig> out;
  for (const std::string& f : flags) {
    const std::size_t a = f.find('=');
    const std::size_t b = a == std::string::npos ? a : f.find('=', a + 1);
    if (b == std::string::npos) throw UsageError("--source expects ID=WEIGHT=DIR, got '" + f + "'");
    config::MixSourceConfig s;
    s.id = f.substr(0, a);
    try {
      std::size_t used = 0;
      const std::string w = f.substr(a + 1, b - a - 1);
      s.weight = std::stod(w, &used);
      if (used != w.size()) throw std::invalid_argument(w);
    } catch (const std::exception&) {
      throw UsageError("--source weight is not a number in '" + f + "'");
    }
    s.shards = f.substr(b + 1);
    out.push_back(std::move(s));
  }
  return out;
}

int RunMix(Context& ctx, const MixArgs& a) {
  const auto sources = a.sources.empty() ? ctx.rc.mix : ParseSources(a.sources);
  if (sources.empty()) throw UsageError("mix needs --source flags or a mix section in --config");
  if (a.draws < 0) throw UsageError("--draws must be >= 0");
  store::MixSpec spec;
  spec.seed = ctx.rc.seed;
  std::map<std::string, std::unique_ptr<store::SampleSource>> readers;
  for (const auto& s : sources) {
    spec.sources.emplace_back(s.id, s.weight);
    store::LoadManifest(s.shards);
    readers[s.id] = std::make_unique<store::ShardSource>(s.shards);
  }
  try {
    spec.NormalizedWeights();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, "mix weights: " + e.detail());
  }
  if (ctx.shared.dry_run) {
    ctx.out << Json{{"dry_run", true}, {"sources", sources.size()}}.dump() << "\n";
    return kExitOk;
  }
  store::MixStream stream(std::move(readers), spec);
  std::map<std::string, long long> counts;
  std::string lines;
  long long drawn = 0;
  for (; drawn < a.draws && !StopFlag().load(); ++drawn) {
    auto [id, sample] = stream.Next();
    ++counts[id];
    lines += Json{{"draw", drawn}, {"source", id}, {"sample_id", sample.sample_id}}.dump() + "\n";
  }
  WriteOrPrint(ctx, a.out, lines);
  Json freq = Json::object();
  const auto weights = spec.NormalizedWeights();
  for (std::size_t i = 0; i < spec.sources.size(); ++i) {
    const std::string& id = spec.sources[i].first;
    freq[id] = {{"weight", weights[i]},
                {"observed", drawn > 0 ? static_cast<double>(counts[id]) / drawn : 0.0}};
  }
  ctx.log.Info("mix.done", {{"draws", drawn}, {"sources", freq}});
  return drawn < a.draws ? kExitFailure : kExitOk;
}

// ---- guide demo -------------------------------------------------------------

struct DemoArgs {
  double s1 = 0, s2 = 0, shift = 0;
  int steps = 0;
  CLI::Option* o_s1 = nullptr;
  CLI::Option* o_s2 = nullptr;
  CLI::Option* o_shift = nullptr;
  CLI::Option* o_steps = nullptr;
};

// Toy denoiser: base level 0, 1 or 2 for (null, null), (null, visual) and
// (text, visual), plus a small term in z and t.
guidance::Prediction ToyDenoiser(std::span<const double> z, const guidance::ConditionSet& c,
                                 double t) {
  const double base = c.text ? 2.0 : (c.visual ? 1.0 : 0.0);
  guidance::Prediction p;
  for (double v : z) p.values.push_back(base + 0.1 * v * t);
  return p;
}

int RunDemo(Context& ctx, const DemoArgs& a) {
  guidance::GuidanceConfig g = ctx.rc.guidance;
  if (a.o_s1->count() > 0) g.s1 = a.s1;
  if (a.o_s2->count() > 0) g.s2 = a.s2;
  if (a.o_shift->count() > 0) g.shift = a.shift;
  if (a.o_steps->count() > 0) g.num_steps = a.steps;
  try {
    g.Validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, "guidance: " + e.detail());
  }
  if (ctx.shared.dry_run) {
    ctx.out << Json{{"dry_run", true}}.dump() << "\n";
    return kExitOk;
  }
  const guidance::AffineCoefficients k = guidance::Coefficients(g.s1, g.s2);
  const std::vector<double> schedule = guidance::ShiftedSchedule(g.num_steps, g.shift);

  Rng rng(ctx.rc.seed);
  std::vector<double> z(4);
  for (double& v : z) v = 2.0 * rng.Uniform01() - 1.0;
  const std::optional<std::string> text = "a red kite above a lighthouse";
  const std::optional<std::string> visual = "reference:0";
  const double t = schedule.front();
  const guidance::Prediction guided =
      guidance::GuidedStep(ToyDenoiser, z, text, visual, t, g);
  const auto e00 = ToyDenoiser(z, {std::nullopt, std::nullopt}, t).values;
  const auto e0v = ToyDenoiser(z, {std::nullopt, visual}, t).values;
  const auto etv = ToyDenoiser(z, {text, visual}, t).values;
  std::vector<double> affine(z.size());
  double max_diff = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    affine[i] = k.null_null * e00[i] + k.null_text * e0v[i] + k.full * etv[i];
    max_diff = std::max(max_diff, std::abs(affine[i] - guided.values[i]));
  }
  const std::vector<double> zero(1, 0.0);
  const double fixture = guidance::GuidedStep(ToyDenoiser, zero, text, visual, t, g).values[0];

  const Json report = {
      {"config", {{"s1", g.s1}, {"s2", g.s2}, {"shift", g.shift}, {"num_steps", g.num_steps}}},
      {"coefficients",
       {{"eps_null_null", k.null_null}, {"eps_null_visual", k.null_text}, {"eps_text_visual", k.full}}},
      {"fixture", {{"eps", {0.0, 1.0, 2.0}}, {"guided", fixture}}},
      {"step",
       {{"t", t}, {"z", z}, {"guided", guided.values}, {"affine", affine}, {"max_abs_diff", max_diff}}},
      {"schedule", schedule}};
  ctx.out << report.dump(2) << "\n";
  return kExitOk;
}

const CLI::App* Deepest(const CLI::App* app) {
  auto subs = app->get_subcommands();
  while (!subs.empty()) {
    app = subs.front();
    subs = app->get_subcommands();
  }
  return app;
}

config::Overrides MakeOverrides(const Shared& sh, const CLI::Option* seed, const CLI::Option* workers) {
  config::Overrides o;
  if (seed->count() > 0) o.seed = sh.seed;
  if (workers->count() > 0) o.workers = sh.workers;
  for (const std::string& e : sh.endpoints) {
    const std::size_t eq = e.find('=');
    const auto role = eq == std::string::npos ? std::nullopt : clients::ParseRole(e.substr(0, eq));
    if (!role || eq + 1 == e.size()) throw UsageError("--endpoint expects ROLE=URL, got '" + e + "'");
    o.endpoint_urls[*role] = e.substr(eq + 1);
  }
  return o;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const config::EnvLookup& env) {
  StopFlag().store(false);
  CLI::App app{"Interleaved image-text dataset construction and evaluation.", "forge"};
  app.require_subcommand(1);
  app.fallthrough();

  Shared sh;
  auto* o_seed = app.add_option("--seed", sh.seed, "Seed for every random choice");
  auto* o_workers =
      app.add_option("--workers", sh.workers, "Worker threads")->check(CLI::Range(1, 256));
  app.add_option("--config", sh.config_file, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--mock", sh.mock, "Serve model calls from a recorded transcript")
      ->check(CLI::ExistingFile);
  app.add_option("--endpoint", sh.endpoints, "ROLE=URL endpoint override, repeatable");
  app.add_flag("--dry-run", sh.dry_run, "Validate configuration and endpoints, write nothing");

  ImageArgs image_args;
  auto* image_cmd = app.add_subcommand("image", "Build samples from a still-image corpus");
  image_cmd->add_option("--corpus", image_args.corpus, "Directory of PNGs or a list file")
      ->required()
      ->check(CLI::ExistingPath);
  image_cmd->add_option("--out", image_args.out, "Output shard directory")->required();
  image_cmd->add_flag("--force", image_args.force, "Replace an existing dataset in --out");

  VideoArgs video_args;
  auto* video_cmd = app.add_subcommand("video", "Build samples from frame sequences");
  video_cmd->add_option("--videos", video_args.videos, "Directory of frame-sequence directories")
      ->required()
      ->check(CLI::ExistingDirectory);
  video_cmd->add_option("--out", video_args.out, "Output shard directory")->required();
  video_cmd->add_flag("--force", video_args.force, "Replace an existing dataset in --out");

  auto* bench_cmd = app.add_subcommand("bench", "Benchmark curation, review and scoring");
  bench_cmd->require_subcommand(1);
  CurateArgs curate_args;
  auto* curate_cmd = bench_cmd->add_subcommand("curate", "Curate cases into a review queue");
  curate_cmd->add_option("--pool", curate_args.pool, "Entity pool directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  curate_cmd->add_option("--queue", curate_args.queue, "Review queue directory")->required();
  curate_cmd->add_option("--count", curate_args.count, "Cases to curate")->check(CLI::Range(1, 100000));
  ServeArgs serve_args;
  auto* serve_cmd = bench_cmd->add_subcommand("review-serve", "Serve the review HTTP API");
  serve_cmd->add_option("--queue", serve_args.queue, "Review queue directory")->required();
  serve_cmd->add_option("--host", serve_args.host, "Bind address");
  serve_cmd->add_option("--port", serve_args.port, "Port, 0 picks a free one")->check(CLI::Range(0, 65535));
  EvalArgs eval_args;
  auto* eval_cmd = bench_cmd->add_subcommand("eval", "Score generated images of accepted cases");
  eval_cmd->add_option("--queue", eval_args.queue, "Review queue directory")->required();
  eval_cmd->add_option("--generated", eval_args.generated, "Directory of <case_id>.png")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--questions", eval_args.questions, "Question bank (NDJSON)");
  eval_cmd->add_option("--out", eval_args.out, "Evaluation records (NDJSON), default stdout");
  ReportArgs report_args;
  auto* report_cmd = bench_cmd->add_subcommand("report", "Aggregate evaluation records");
  report_cmd->add_option("--records", report_args.records, "Evaluation records (NDJSON)")
      ->required()
      ->check(CLI::ExistingFile);
  report_cmd->add_option("--out", report_args.out, "Machine-readable report (JSON)");

  MixArgs mix_args;
  auto* mix_cmd = app.add_subcommand("mix", "Draw a weighted training mix over shard directories");
  mix_cmd->add_option("--source", mix_args.sources, "ID=WEIGHT=DIR, repeatable");
  mix_cmd->add_option("--draws", mix_args.draws, "Number of draws");
  mix_cmd->add_option("--out", mix_args.out, "Draws (NDJSON), default stdout");

  auto* guide_cmd = app.add_subcommand("guide", "Guidance utilities");
  guide_cmd->require_subcommand(1);
  DemoArgs demo_args;
  auto* demo_cmd = guide_cmd->add_subcommand("demo", "Run a toy denoiser through one guided step");
  demo_args.o_s1 = demo_cmd->add_option("--s1", demo_args.s1, "Text-image balance");
  demo_args.o_s2 = demo_cmd->add_option("--s2", demo_args.s2, "Overall strength");
  demo_args.o_shift = demo_cmd->add_option("--shift", demo_args.shift, "Timestep shift");
  demo_args.o_steps = demo_cmd->add_option("--steps", demo_args.steps, "Sampling steps");

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "error: " << e.what() << "\n\n" << Deepest(&app)->help();
    return kExitUsage;
  }

  Log log(err);
  try {
    std::optional<fs::path> file;
    if (!sh.config_file.empty()) file = sh.config_file;
    Context ctx{out, log, sh, config::LoadRunConfig(file, env, MakeOverrides(sh, o_seed, o_workers))};
    log.Info("config", ctx.rc.Redacted());
    if (image_cmd->parsed()) return RunImage(ctx, image_args);
    if (video_cmd->parsed()) return RunVideo(ctx, video_args);
    if (curate_cmd->parsed()) return RunCurate(ctx, curate_args);
    if (serve_cmd->parsed()) return RunServe(ctx, serve_args);
    if (eval_cmd->parsed()) return RunEval(ctx, eval_args);
    if (report_cmd->parsed()) return RunReport(ctx, report_args);
    if (mix_cmd->parsed()) return RunMix(ctx, mix_args);
    if (demo_cmd->parsed()) return RunDemo(ctx, demo_args);
    throw UsageError("no command");
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << Deepest(&app)->help();
    return kExitUsage;
  } catch (const Error& e) {
    const bool usage = e.code() == ErrorCode::kConfigError;
    log.Fail(usage ? "config_error" : "failed",
             {{"code", std::string(ErrorCodeName(e.code()))}, {"message", e.detail()}});
    return usage ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    log.Fail("failed", {{"message", e.what()}});
    return kExitFailure;
  }
}

}  // namespace forge::cli
