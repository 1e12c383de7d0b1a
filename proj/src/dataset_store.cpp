// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/dataset_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <sstream>

#include "forge/error.hpp"

namespace forge::store {
namespace fs = std::filesystem;
using OJson = nlohmann::ordered_json;

namespace {

std::string ShardName(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "shard-%05zu.ndjson", index);
  return buf;
}

fs::path BlobPath(const fs::path& dir, const std::string& digest) {
  return dir / "blobs" / (digest + ".png");
}

[[noreturn]] void Malformed(const std::string& what) {
  throw Error(ErrorCode::kSchemaViolation, what);
}

const nlohmann::json& Field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) Malformed(std::string("missing field ") + key);
  return *it;
}

template <typename T>
T FieldAs(const nlohmann::json& j, const char* key) {
  try {
    return Field(j, key).get<T>();
  } catch (const nlohmann::json::exception&) {
    Malformed(std::string("field ") + key + " has the wrong type");
  }
}

}  // namespace

std::size_t ShardManifest::TotalCount() const {
  std::size_t n = 0;
  for (const auto& s : shards) n += s.count;
  return n;
}

nlohmann::json ShardManifest::ToJson() const {
  OJson shards_json = OJson::array();
  for (const auto& s : shards) {
    shards_json.push_back(OJson{{"path", s.path}, {"count", s.count}, {"digest", s.digest}});
  }
  OJson counts = OJson::object();
  for (const auto& [k, v] : provenance_counts) counts[k] = v;
  const OJson j{{"schema_version", schema_version},
                {"shards", shards_json},
                {"provenance_counts", counts}};
  return nlohmann::json::parse(j.dump());
}

ShardManifest ShardManifest::FromJson(const nlohmann::json& j) {
  if (!j.is_object()) Malformed("manifest is not an object");
  ShardManifest m;
  m.schema_version = FieldAs<int>(j, "schema_version");
  if (m.schema_version != kSchemaVersion) {
    Malformed("unsupported schema_version " + std::to_string(m.schema_version));
  }
  for (const auto& s : Field(j, "shards")) {
    m.shards.push_back({FieldAs<std::string>(s, "path"), FieldAs<std::size_t>(s, "count"),
                        FieldAs<std::string>(s, "digest")});
  }
  for (const auto& [k, v] : Field(j, "provenance_counts").items()) {
    m.provenance_counts[k] = v.get<std::size_t>();
  }
  return m;
}

std::string SerializeRecord(const InterleavedSample& sample) {
  OJson mapping = OJson::array();
  for (const auto& e : sample.mapping.entries) {
    mapping.push_back(OJson{{"phrase", e.phrase}, {"index", e.image_index}});
  }
  OJson digests = OJson::array();
  OJson meta = OJson::array();
  for (const auto& a : sample.assets) {
    digests.push_back(Sha256Hex(a.image_bytes));
    OJson m{{"source", AssetSourceName(a.source)}};
    if (a.bbox) m["bbox"] = OJson{{"x", a.bbox->x}, {"y", a.bbox->y}, {"w", a.bbox->w}, {"h", a.bbox->h}};
    m["origin_ref"] = a.origin_ref;
    meta.push_back(std::move(m));
  }
  OJson rec{{"sample_id", sample.sample_id},
            {"provenance", ProvenanceName(sample.provenance)},
            {"instruction_text", RenderTemplate(sample.instruction)},
            {"mapping", mapping},
            {"asset_digests", digests},
            {"asset_meta", meta}};
  if (sample.target_image) rec["target_digest"] = Sha256Hex(*sample.target_image);
  rec["engine_config_digest"] = sample.engine_config_digest;
  return rec.dump();
}

// ---- Writer ------------------------------------------------------------------

ShardWriter::ShardWriter(fs::path dir, WriterOptions options)
    : dir_(std::move(dir)), options_(std::move(options)) {
  if (options_.max_records_per_shard == 0) {
    throw Error(ErrorCode::kInvalidArgument, "max_records_per_shard must be >= 1");
  }
  std::error_code ec;
  fs::create_directories(dir_ / "blobs", ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + dir_.string() + ": " + ec.message());
  lock_fd_ = ::open((dir_ / ".lock").c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
  if (lock_fd_ < 0) throw Error(ErrorCode::kIoFailure, "cannot open lock in " + dir_.string());
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd_);
    lock_fd_ = -1;
    throw Error(ErrorCode::kIoFailure, dir_.string() + " is locked by another writer");
  }
  if (fs::exists(dir_ / kManifestName)) {
    ::close(lock_fd_);
    lock_fd_ = -1;
    throw Error(ErrorCode::kIoFailure, dir_.string() + " already holds a committed dataset");
  }
}

ShardWriter::~ShardWriter() {
  if (!done_) Abort();
  if (lock_fd_ >= 0) ::close(lock_fd_);
}

std::string ShardWriter::StoreBlob(const Bytes& png) {
  const std::string digest = Sha256Hex(png);
  const fs::path path = BlobPath(dir_, digest);
  if (!fs::exists(path)) WriteFileAtomic(path.string(), png);
  return digest;
}

void ShardWriter::Write(const InterleavedSample& sample) {
  if (done_) throw Error(ErrorCode::kIoFailure, "writer is closed");
  const auto problems = CheckSample(sample);
  if (!problems.empty()) {
    Abort();
    std::string msg = "sample " + sample.sample_id + ":";
    for (const auto& p : problems) msg += " " + p + ";";
    throw Error(ErrorCode::kInvalidSample, msg);
  }
  for (const auto& a : sample.assets) StoreBlob(a.image_bytes);
  if (sample.target_image) StoreBlob(*sample.target_image);
  pending_ += SerializeRecord(sample);
  pending_ += '\n';
  ++pending_count_;
  ++manifest_.provenance_counts[std::string(ProvenanceName(sample.provenance))];
  ++written_;
  if (pending_count_ == options_.max_records_per_shard) FlushShard();
}

void ShardWriter::FlushShard() {
  if (pending_count_ == 0) return;
  const std::string name = ShardName(manifest_.shards.size());
  const fs::path path = dir_ / name;
  WriteFileAtomic(path.string(), pending_);
  shard_files_.push_back(path);
  manifest_.shards.push_back({name, pending_count_, Sha256Hex(pending_)});
  pending_.clear();
  pending_count_ = 0;
}

ShardManifest ShardWriter::Commit() {
  if (done_) throw Error(ErrorCode::kIoFailure, "writer is closed");
  FlushShard();
  if (options_.before_commit) options_.before_commit();
  WriteFileAtomic((dir_ / kManifestName).string(), manifest_.ToJson().dump(2) + "\n");
  done_ = true;
  if (lock_fd_ >= 0) {
    ::close(lock_fd_);
    lock_fd_ = -1;
  }
  return manifest_;
}

void ShardWriter::Abort() {
  std::error_code ec;
  for (const auto& p : shard_files_) fs::remove(p, ec);
  shard_files_.clear();
  pending_.clear();
  pending_count_ = 0;
  done_ = true;
}

ShardManifest WriteShards(const std::vector<InterleavedSample>& samples, const fs::path& dir,
                          WriterOptions options) {
  ShardWriter writer(dir, std::move(options));
  for (const auto& s : samples) writer.Write(s);
  return writer.Commit();
}

ShardManifest LoadManifest(const fs::path& dir) {
  const fs::path path = dir / kManifestName;
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kManifestNotFound, "no manifest in " + dir.string());
  }
  const Bytes raw = ReadFileBytes(path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::exception& e) {
    Malformed("manifest: " + std::string(e.what()));
  }
  return ShardManifest::FromJson(j);
}

// ---- Reader ------------------------------------------------------------------

ShardReader::ShardReader(fs::path dir) : dir_(std::move(dir)), manifest_(LoadManifest(dir_)) {}

ShardReader::ShardReader(fs::path dir, ShardManifest manifest)
    : dir_(std::move(dir)), manifest_(std::move(manifest)) {}

void ShardReader::Rewind() {
  shard_ = 0;
  line_ = 0;
  lines_.clear();
  opened_ = false;
}

void ShardReader::OpenShard(std::size_t index) {
  const ShardEntry& entry = manifest_.shards[index];
  const fs::path path = dir_ / entry.path;
  if (!fs::exists(path)) throw Error(ErrorCode::kIoFailure, "missing shard " + entry.path);
  const Bytes raw = ReadFileBytes(path.string());
  if (Sha256Hex(raw) != entry.digest) {
    throw Error(ErrorCode::kDigestMismatch, "shard " + entry.path + " does not match its digest");
  }
  lines_.clear();
  std::string text(raw.begin(), raw.end());
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines_.push_back(std::move(line));
  if (lines_.size() != entry.count) {
    throw Error(ErrorCode::kSchemaViolation, "shard " + entry.path + " holds " +
                                                 std::to_string(lines_.size()) + " records, manifest says " +
                                                 std::to_string(entry.count));
  }
  line_ = 0;
  opened_ = true;
}

std::optional<InterleavedSample> ShardReader::Next() {
  while (true) {
    if (shard_ >= manifest_.shards.size()) return std::nullopt;
    if (!opened_) OpenShard(shard_);
    if (line_ < lines_.size()) return Decode(lines_[line_++]);
    ++shard_;
    opened_ = false;
  }
}

Bytes ShardReader::LoadBlob(const std::string& digest) const {
  const fs::path path = BlobPath(dir_, digest);
  if (!fs::exists(path)) throw Error(ErrorCode::kMissingBlob, "blob " + digest + " is missing");
  Bytes data = ReadFileBytes(path.string());
  if (Sha256Hex(data) != digest) {
    throw Error(ErrorCode::kDigestMismatch, "blob " + digest + " does not match its name");
  }
  return data;
}

InterleavedSample ShardReader::Decode(const std::string& line) const {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    Malformed("record: " + std::string(e.what()));
  }
  InterleavedSample s;
  s.sample_id = FieldAs<std::string>(j, "sample_id");
  s.provenance = ParseProvenance(FieldAs<std::string>(j, "provenance"));
  s.instruction = ParseTemplate(FieldAs<std::string>(j, "instruction_text"));
  for (const auto& e : Field(j, "mapping")) {
    s.mapping.entries.push_back({FieldAs<std::string>(e, "phrase"), FieldAs<int>(e, "index")});
  }
  const auto digests = FieldAs<std::vector<std::string>>(j, "asset_digests");
  const auto& meta = Field(j, "asset_meta");
  if (!meta.is_array() || meta.size() != digests.size()) {
    Malformed("asset_meta and asset_digests differ in length");
  }
  for (std::size_t i = 0; i < digests.size(); ++i) {
    VisualAsset a;
    a.image_bytes = LoadBlob(digests[i]);
    a.source = ParseAssetSource(FieldAs<std::string>(meta[i], "source"));
    a.origin_ref = FieldAs<std::string>(meta[i], "origin_ref");
    if (meta[i].contains("bbox")) {
      const auto& b = meta[i]["bbox"];
      a.bbox = Box{FieldAs<int>(b, "x"), FieldAs<int>(b, "y"), FieldAs<int>(b, "w"),
                   FieldAs<int>(b, "h")};
    }
    s.assets.push_back(std::move(a));
  }
  if (j.contains("target_digest")) s.target_image = LoadBlob(FieldAs<std::string>(j, "target_digest"));
  s.engine_config_digest = FieldAs<std::string>(j, "engine_config_digest");
  return s;
}

std::vector<InterleavedSample> ReadAll(const fs::path& dir) {
  ShardReader reader(dir);
  std::vector<InterleavedSample> out;
  while (auto s = reader.Next()) out.push_back(std::move(*s));
  return out;
}

// ---- Mix ---------------------------------------------------------------------

std::optional<InterleavedSample> VectorSource::Next() {
  if (pos_ >= samples_.size()) return std::nullopt;
  return samples_[pos_++];
}

std::vector<double> MixSpec::NormalizedWeights() const {
  if (sources.empty()) throw Error(ErrorCode::kInvalidArgument, "mix has no sources");
  double total = 0;
  for (const auto& [id, w] : sources) {
    if (!(w > 0) || !std::isfinite(w)) {
      throw Error(ErrorCode::kInvalidArgument, "weight of " + id + " must be a positive number");
    }
    total += w;
  }
  std::vector<double> out;
  for (const auto& [id, w] : sources) out.push_back(w / total);
  return out;
}

MixSpec MixSpec::FromJson(const nlohmann::json& j) {
  MixSpec spec;
  try {
    for (const auto& s : j.at("sources")) {
      spec.sources.emplace_back(s.at("id").get<std::string>(), s.at("weight").get<double>());
    }
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("mix spec: ") + e.what());
  }
  return spec;
}

nlohmann::json MixSpec::ToJson() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [id, w] : sources) arr.push_back({{"id", id}, {"weight", w}});
  return {{"sources", arr}, {"seed", seed}};
}

MixStream::MixStream(std::map<std::string, std::unique_ptr<SampleSource>> sources, MixSpec spec)
    : spec_(std::move(spec)), rng_(spec_.seed) {
  double acc = 0;
  for (double w : spec_.NormalizedWeights()) {
    acc += w;
    cumulative_.push_back(acc);
  }
  cumulative_.back() = 1.0;
  for (const auto& [id, w] : spec_.sources) {
    auto it = sources.find(id);
    if (it == sources.end() || !it->second) {
      throw Error(ErrorCode::kInvalidArgument, "no stream for mix source " + id);
    }
    if (!it->second->Next()) throw Error(ErrorCode::kEmptySource, "mix source " + id + " is empty");
    it->second->Rewind();
    ordered_.push_back(std::move(it->second));
  }
}

std::size_t MixStream::DrawSource() {
  const double u = rng_.Uniform01();
  for (std::size_t i = 0; i < cumulative_.size(); ++i) {
    if (u < cumulative_[i]) return i;
  }
  return cumulative_.size() - 1;
}

std::pair<std::string, InterleavedSample> MixStream::Next() {
  const std::size_t i = DrawSource();
  auto next = ordered_[i]->Next();
  if (!next) {
    ordered_[i]->Rewind();
    next = ordered_[i]->Next();
    if (!next) throw Error(ErrorCode::kEmptySource, "mix source " + spec_.sources[i].first + " is empty");
  }
  return {spec_.sources[i].first, std::move(*next)};
}

}  // namespace forge::store
