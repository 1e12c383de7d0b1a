// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/fixtures.hpp"

#include <cstdio>

#include "forge/benchmark.hpp"
#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/image_engine.hpp"
#include "forge/synthetic_world.hpp"
#include "forge/video_engine.hpp"

namespace forge::fixtures {
namespace fs = std::filesystem;
using clients::Clients;
using clients::Json;
using clients::RecordingTransport;

namespace {

void Describe(const fs::path& dir, const std::string& kind, std::uint64_t seed, Json extra) {
  extra["kind"] = kind;
  extra["seed"] = seed;
  const std::string text = extra.dump(2) + "\n";
  WriteFileAtomic((dir / "fixture.json").string(), Bytes(text.begin(), text.end()));
}

void Reset(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
}

}  // namespace

void WriteImageFixture(const fs::path& dir, const ImageFixtureOptions& options) {
  Reset(dir / "corpus");
  synth::World world(options.seed);
  std::vector<fs::path> files;
  for (int i = 0; i < options.scenes; ++i) {
    synth::SceneOptions so;
    so.width = 224;
    so.height = 168;
    // 2..10 objects: two-object scenes fall below the floor, nine and ten
    // exercise the cap.
    so.objects = 2 + i % 9;
    so.broken_segment = i % 11 == 5 ? 1 : -1;
    so.add_huge_box = i % 4 == 1;
    const synth::Scene scene = synth::MakeScene(DeriveSeed(options.seed, "scene" + std::to_string(i)), so);
    world.AddScene(scene, so);
    if (i % 7 == 3) world.MarkSloppyWriter(scene.caption);
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%03d.png", i);
    files.push_back(dir / "corpus" / name);
    WriteFileAtomic(files.back().string(), scene.png);
  }

  auto recorder = std::make_shared<RecordingTransport>(world.AsResponder());
  Clients clients = Clients::Mock(recorder);
  image::ImageEngineConfig config;
  config.rng_seed = options.seed;
  for (const fs::path& f : files) {
    try {
      image::BuildImageSample(ReadFileBytes(f.string()), f.filename().string(), clients, config);
    } catch (const Error&) {
      // Rejections are part of the fixture.
    }
  }
  recorder->transcript().Save((dir / "transcript.json").string());
  Describe(dir, "image", options.seed, {{"scenes", options.scenes}});
}

void WriteVideoFixture(const fs::path& dir, const VideoFixtureOptions& options) {
  Reset(dir / "videos");
  using synth::ObjectMotion;
  struct Spec {
    const char* name;
    synth::ClipOptions options;
  };
  std::vector<Spec> specs;
  specs.push_back({"street", {}});
  {
    synth::ClipOptions o;
    o.motions = {ObjectMotion::kDynamic, ObjectMotion::kStatic, ObjectMotion::kDynamic,
                 ObjectMotion::kDynamic};
    o.times = {0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 13.0};
    specs.push_back({"market", o});
  }
  {
    synth::ClipOptions o;
    o.frozen = true;
    specs.push_back({"still_life", o});
  }
  {
    synth::ClipOptions o;
    o.motions = {ObjectMotion::kFlat, ObjectMotion::kDynamic};
    specs.push_back({"poster_wall", o});
  }
  {
    synth::ClipOptions o;
    o.times = {0.0, 1.0};
    specs.push_back({"blink", o});
  }

  synth::World world(options.seed);
  std::vector<fs::path> clips;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const synth::Clip clip = synth::MakeClip(DeriveSeed(options.seed, specs[i].name), specs[i].name,
                                             specs[i].options);
    world.AddClip(clip);
    video::FrameSequence seq;
    seq.name = clip.name;
    for (const auto& f : clip.frames) seq.frames.push_back({f.time, f.image, f.png});
    clips.push_back(dir / "videos" / clip.name);
    video::SaveFrameSequence(seq, clips.back());
  }

  auto recorder = std::make_shared<RecordingTransport>(world.AsResponder());
  Clients clients = Clients::Mock(recorder);
  video::VideoEngineConfig config;
  config.rng_seed = options.seed;
  for (const fs::path& c : clips) {
    try {
      video::ProcessVideo(video::LoadFrameSequence(c), clients, config);
    } catch (const Error&) {
      // Clips without a valid pair are part of the fixture.
    }
  }
  recorder->transcript().Save((dir / "transcript.json").string());
  Describe(dir, "video", options.seed, {{"clips", specs.size()}});
}

void WriteBenchFixture(const fs::path& dir, const BenchFixtureOptions& options) {
  Reset(dir / "pool");
  Reset(dir / "generated");
  synth::World world(options.seed);
  std::vector<bench::BenchEntity> pool;
  for (int i = 0; i < options.entities; ++i) {
    const synth::BenchEntityArt art =
        synth::MakeEntity(DeriveSeed(options.seed, "entity" + std::to_string(i)));
    world.AddEntity(art);
    bench::BenchEntity e;
    char id[16];
    std::snprintf(id, sizeof(id), "ent%02d", i);
    e.entity_id = id;
    e.label = art.label;
    e.description = art.description;
    e.asset.image_bytes = art.png;
    e.asset.source = AssetSource::kFullImage;
    e.asset.origin_ref = e.entity_id;
    pool.push_back(std::move(e));
  }
  bench::SaveEntityPool(pool, dir / "pool");
  pool = bench::LoadEntityPool(dir / "pool");

  auto recorder = std::make_shared<RecordingTransport>(world.AsResponder());
  Clients clients = Clients::Mock(recorder);
  const bench::CurateBatch batch =
      bench::CurateCases(pool, options.cases, options.seed, clients, bench::CurateOptions{});

  // Stand-in generations: references side by side at a common height, with
  // a per-case fidelity that drives the judge and answerer.
  Rng rng(DeriveSeed(options.seed, "fidelity"));
  for (const bench::BenchCase& c : batch.cases) {
    Raster strip = ResizeBilinear(DecodePng(c.references[0].image_bytes), 48, 48);
    for (std::size_t k = 1; k < c.references.size(); ++k) {
      strip = ConcatHorizontal(strip, DecodePng(c.references[k].image_bytes));
    }
    const Bytes png = EncodePng(strip);
    world.AddGenerated(png, 0.3 + 0.7 * rng.Uniform01());
    WriteFileAtomic((dir / "generated" / (c.case_id + ".png")).string(), png);

    bench::BenchCase accepted = c;
    accepted.review_state = bench::ReviewState::kAccepted;
    bench::EvaluateCase(accepted, png, bench::FormulateQuestions(c, clients), clients);
  }
  recorder->transcript().Save((dir / "transcript.json").string());
  Describe(dir, "bench", options.seed,
           {{"entities", options.entities}, {"cases", batch.cases.size()}});
}

}  // namespace forge::fixtures
