// Copyright 2026 The Interleave Forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "forge/synthetic_world.hpp"

#include <algorithm>
#include <cmath>

#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/synthetic.hpp"

namespace forge::synth {
using clients::ClientRole;
using clients::Json;

namespace {

struct NamedColor {
  const char* name;
  Rgb rgb;
};

constexpr NamedColor kColors[] = {
    {"red", {200, 40, 40}},     {"orange", {230, 130, 30}}, {"yellow", {225, 205, 50}},
    {"green", {50, 160, 70}},   {"teal", {30, 140, 140}},   {"blue", {40, 80, 200}},
    {"purple", {130, 60, 170}}, {"pink", {225, 120, 170}},  {"brown", {120, 80, 40}},
    {"gray", {128, 128, 128}},  {"white", {235, 235, 235}}, {"black", {25, 25, 25}},
};

constexpr const char* kNouns[] = {
    "kite",   "lamp",  "mug",    "violin", "bicycle", "teapot", "backpack", "clock",
    "cactus", "guitar", "helmet", "kettle", "lantern", "robot",  "sneaker",  "umbrella",
    "vase",   "camera", "drum",  "globe",  "puppy",   "kitten", "parrot",   "toaster"};

constexpr const char* kPatterns[] = {"striped", "speckled", "checkered", "swirled",
                                     "patched", "dotted",   "zigzag",    "marbled"};

constexpr const char* kSettings[] = {"sunlit studio",    "cluttered workshop", "quiet kitchen",
                                     "rooftop terrace",  "market stall",       "reading nook",
                                     "garden shed",      "toy shop window"};

constexpr const char* kStates[] = {"tipped on its side", "seen from the back", "in dim light",
                                   "half hidden",        "freshly repainted",  "turned around"};

constexpr const char* kVerbs[] = {"share the frame", "sit close together", "are arranged in a row",
                                  "catch the afternoon light", "crowd the table"};

template <typename T, std::size_t N>
const T& Pick(const T (&items)[N], Rng& rng) {
  return items[rng.Below(N)];
}

std::string Article(const std::string& word) {
  return std::string("aeiou").find(word[0]) != std::string::npos ? "an" : "a";
}

std::string JoinLabels(const std::vector<SceneObject>& objects) {
  std::string out;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (i > 0) out += i + 1 == objects.size() ? " and " : ", ";
    out += Article(objects[i].color) + " " + objects[i].color + " " + objects[i].label;
  }
  return out;
}

// Paints a textured object of the given outline into `image` and returns
// its image-sized mask.
Mask PaintObject(Raster& image, const Box& box, bool ellipse, Rgb base, Rng& rng,
                 bool textured = true) {
  Raster patch(box.w, box.h);
  FillBox(patch, {0, 0, box.w, box.h}, base);
  if (textured) PaintTexture(patch, {0, 0, box.w, box.h}, rng, 4 + box.w * box.h / 60);
  Mask mask{image.width(), image.height(),
            std::vector<std::uint8_t>(static_cast<std::size_t>(image.width()) * image.height(), 0)};
  const double ax = box.w / 2.0, ay = box.h / 2.0;
  for (int y = 0; y < box.h; ++y) {
    for (int x = 0; x < box.w; ++x) {
      if (ellipse) {
        const double dx = (x + 0.5 - ax) / ax, dy = (y + 0.5 - ay) / ay;
        if (dx * dx + dy * dy > 1.0) continue;
      }
      const int ix = box.x + x, iy = box.y + y;
      if (ix < 0 || iy < 0 || ix >= image.width() || iy >= image.height()) continue;
      const std::uint8_t* p = patch.at(x, y);
      image.Set(ix, iy, p[0], p[1], p[2]);
      mask.bits[static_cast<std::size_t>(iy) * image.width() + ix] = 1;
    }
  }
  return mask;
}

void PaintBackground(Raster& image, Rng& rng) {
  const Rgb bg = {static_cast<std::uint8_t>(60 + rng.Below(120)),
                  static_cast<std::uint8_t>(60 + rng.Below(120)),
                  static_cast<std::uint8_t>(60 + rng.Below(120))};
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const int shade = (x + 2 * y) / 16;
      image.Set(x, y, static_cast<std::uint8_t>(std::min(255, bg[0] + shade)),
                static_cast<std::uint8_t>(std::min(255, bg[1] + shade)),
                static_cast<std::uint8_t>(std::min(255, bg[2] + shade)));
    }
  }
}

bool Overlaps(const Box& a, const std::vector<Box>& others, int gap) {
  for (const Box& b : others) {
    if (a.x < b.x + b.w + gap && b.x < a.x + a.w + gap && a.y < b.y + b.h + gap &&
        b.y < a.y + a.h + gap) {
      return true;
    }
  }
  return false;
}

std::vector<Box> PlaceBoxes(Rng& rng, int width, int height, int count, int min_side,
                            int max_side) {
  std::vector<Box> boxes;
  for (int k = 0; k < count; ++k) {
    for (int attempt = 0; attempt < 300; ++attempt) {
      const int w = static_cast<int>(rng.Between(min_side, max_side));
      const int h = static_cast<int>(rng.Between(min_side, max_side));
      const Box b{static_cast<int>(rng.Below(static_cast<std::uint64_t>(width - w))),
                  static_cast<int>(rng.Below(static_cast<std::uint64_t>(height - h))), w, h};
      if (!Overlaps(b, boxes, 3)) {
        boxes.push_back(b);
        break;
      }
    }
  }
  return boxes;
}

Json BoxJson(const Box& b) { return Json::array({b.x, b.y, b.w, b.h}); }

Box JsonBox(const Json& j) {
  return {static_cast<int>(std::lround(j[0].get<double>())),
          static_cast<int>(std::lround(j[1].get<double>())),
          static_cast<int>(std::lround(j[2].get<double>())),
          static_cast<int>(std::lround(j[3].get<double>()))};
}

const SceneObject* BestMatch(const std::vector<SceneObject>& objects, const Box& box,
                             double min_iou) {
  const SceneObject* best = nullptr;
  double best_iou = min_iou;
  for (const auto& o : objects) {
    const double iou = IoU(o.bbox, box);
    if (iou >= best_iou) {
      best_iou = iou;
      best = &o;
    }
  }
  return best;
}

std::uint64_t Hash(std::uint64_t seed, const std::string& text) { return DeriveSeed(seed, text); }

}  // namespace

Scene MakeScene(std::uint64_t seed, const SceneOptions& options) {
  Rng rng(seed);
  Scene scene;
  scene.image = Raster(options.width, options.height);
  PaintBackground(scene.image, rng);
  const auto boxes = PlaceBoxes(rng, options.width, options.height, options.objects,
                                options.min_side, options.max_side);
  for (const Box& box : boxes) {
    const NamedColor& color = Pick(kColors, rng);
    SceneObject o;
    o.label = Pick(kNouns, rng);
    o.color = color.name;
    o.mask = PaintObject(scene.image, box, rng.Below(2) == 0, color.rgb, rng);
    o.bbox = o.mask.Bounds();
    o.caption = Article(o.color) + " " + o.color + " " + o.label + " with a " +
                Pick(kPatterns, rng) + " surface";
    scene.objects.push_back(std::move(o));
  }
  const std::string setting = Pick(kSettings, rng);
  scene.caption = "A " + setting + " with " +
                  (scene.objects.empty() ? std::string("nothing in it") : JoinLabels(scene.objects)) +
                  ".";
  scene.png = EncodePng(scene.image);
  return scene;
}

Clip MakeClip(std::uint64_t seed, const std::string& name, const ClipOptions& options) {
  Rng rng(seed);
  Clip clip;
  clip.name = name;
  Raster background(options.width, options.height);
  PaintBackground(background, rng);
  const int n = static_cast<int>(options.motions.size());
  // Each object owns a horizontal lane so moving objects never collide.
  const int lane = options.width / std::max(n, 1);
  struct Track {
    std::string label;
    NamedColor color;
    Box box;
    bool ellipse;
    std::uint64_t texture_seed;
  };
  std::vector<Track> tracks;
  for (int k = 0; k < n; ++k) {
    const int side = static_cast<int>(rng.Between(std::min(56, lane - 8), std::min(72, lane - 4)));
    const Box box{k * lane + static_cast<int>(rng.Below(static_cast<std::uint64_t>(lane - side + 1))),
                  static_cast<int>(rng.Below(static_cast<std::uint64_t>(options.height - side))), side,
                  side};
    tracks.push_back({Pick(kNouns, rng), Pick(kColors, rng), box, false, rng.NextU64()});
  }
  const std::string setting = Pick(kSettings, rng);

  for (std::size_t f = 0; f < options.times.size(); ++f) {
    if (options.frozen && f > 0) {
      ClipFrame copy = clip.frames.front();
      copy.time = options.times[f];
      clip.frames.push_back(std::move(copy));
      continue;
    }
    ClipFrame frame;
    frame.time = options.times[f];
    frame.image = background;
    for (int k = 0; k < n; ++k) {
      Track t = tracks[static_cast<std::size_t>(k)];
      std::string state = "at rest";
      if (options.motions[static_cast<std::size_t>(k)] == ObjectMotion::kDynamic && f > 0) {
        Rng change(DeriveSeed(t.texture_seed, "frame" + std::to_string(f)));
        const int max_dx = lane - t.box.w;
        t.box.x = k * lane + static_cast<int>(change.Below(static_cast<std::uint64_t>(max_dx + 1)));
        t.box.y = static_cast<int>(change.Below(static_cast<std::uint64_t>(options.height - t.box.h)));
        t.color = Pick(kColors, change);
        t.ellipse = change.Below(2) == 0;
        t.texture_seed = change.NextU64();
        state = Pick(kStates, change);
      }
      Rng paint(t.texture_seed);
      SceneObject o;
      o.label = t.label;
      o.color = t.color.name;
      const bool flat = options.motions[static_cast<std::size_t>(k)] == ObjectMotion::kFlat;
      o.mask = PaintObject(frame.image, t.box, t.ellipse, t.color.rgb, paint, !flat);
      o.bbox = o.mask.Bounds();
      o.caption = Article(o.color) + " " + o.color + " " + o.label + " " + state;
      frame.objects.push_back(std::move(o));
    }
    char when[32];
    std::snprintf(when, sizeof(when), "%.1f", frame.time);
    frame.caption = "A " + setting + " at " + when + " seconds with " + JoinLabels(frame.objects) + ".";
    frame.png = EncodePng(frame.image);
    clip.frames.push_back(std::move(frame));
  }
  return clip;
}

BenchEntityArt MakeEntity(std::uint64_t seed, int side) {
  Rng rng(seed);
  BenchEntityArt e;
  e.image = Raster(side, side);
  PaintBackground(e.image, rng);
  const NamedColor& color = Pick(kColors, rng);
  e.label = Pick(kNouns, rng);
  const int inset = side / 8;
  PaintObject(e.image, {inset, inset, side - 2 * inset, side - 2 * inset}, rng.Below(2) == 0,
              color.rgb, rng);
  e.description = Article(color.name) + " " + color.name + " " + e.label + " with a " +
                  Pick(kPatterns, rng) + " finish";
  e.png = EncodePng(e.image);
  return e;
}

// ---- World -----------------------------------------------------------------

void World::AddScene(const Scene& scene, const SceneOptions& options) {
  ImageInfo info;
  info.caption = scene.caption;
  info.objects = scene.objects;
  info.width = scene.image.width();
  info.height = scene.image.height();
  info.broken_segment = options.broken_segment;
  Rng rng(Hash(seed_, scene.caption));
  if (options.add_tiny_box) {
    info.extra_detections.push_back(
        {{"label", "speck"},
         {"bbox", BoxJson({static_cast<int>(rng.Below(static_cast<std::uint64_t>(info.width - 4))),
                           static_cast<int>(rng.Below(static_cast<std::uint64_t>(info.height - 4))),
                           3, 3})},
         {"score", 0.31}});
  }
  if (options.add_huge_box) {
    info.extra_detections.push_back(
        {{"label", "backdrop"}, {"bbox", BoxJson({0, 0, info.width, info.height})}, {"score", 0.4}});
  }
  if (options.add_duplicate_box && !scene.objects.empty()) {
    const SceneObject& o = scene.objects.front();
    info.extra_detections.push_back(
        {{"label", o.label},
         {"bbox", BoxJson({o.bbox.x, o.bbox.y, o.bbox.w - 1, o.bbox.h})},
         {"score", 0.55}});
  }
  std::lock_guard<std::mutex> lock(mu_);
  images_[Sha256Hex(scene.png)] = std::move(info);
}

void World::AddClip(const Clip& clip) {
  std::lock_guard<std::mutex> lock(mu_);
  for (const ClipFrame& f : clip.frames) {
    ImageInfo info;
    info.caption = f.caption;
    info.objects = f.objects;
    info.width = f.image.width();
    info.height = f.image.height();
    images_[Sha256Hex(f.png)] = std::move(info);
  }
  for (std::size_t i = 0; i < clip.frames.size(); ++i) {
    for (std::size_t j = i + 1; j < clip.frames.size(); ++j) {
      const ClipFrame& a = clip.frames[i];
      const ClipFrame& b = clip.frames[j];
      double scale = 1.0;
      const Raster composite = ConcatHorizontal(a.image, b.image, &scale);
      Json matches = Json::array();
      for (std::size_t k = 0; k < a.objects.size(); ++k) {
        const Box& l = a.objects[k].bbox;
        const Box& r = b.objects[k].bbox;
        matches.push_back(
            {{"label", a.objects[k].label},
             {"bbox_left", BoxJson(l)},
             {"bbox_right",
              BoxJson({a.image.width() + static_cast<int>(std::lround(r.x * scale)),
                       static_cast<int>(std::lround(r.y * scale)),
                       static_cast<int>(std::lround(r.w * scale)),
                       static_cast<int>(std::lround(r.h * scale))})}});
      }
      // A shadow the model mistakes for an object, straddling the seam.
      matches.push_back({{"label", "shadow"},
                         {"bbox_left", BoxJson({a.image.width() - 10, 4, 20, 20})},
                         {"bbox_right", BoxJson({a.image.width() - 6, 8, 20, 20})}});
      composites_[Sha256Hex(EncodePng(composite))] = PairInfo{std::move(matches)};
    }
  }
}

void World::AddEntity(const BenchEntityArt& entity) {
  ImageInfo info;
  info.caption = "A studio photo of " + entity.description + ".";
  info.width = entity.image.width();
  info.height = entity.image.height();
  std::lock_guard<std::mutex> lock(mu_);
  images_[Sha256Hex(entity.png)] = std::move(info);
}

void World::AddGenerated(const Bytes& png, double fidelity) {
  std::lock_guard<std::mutex> lock(mu_);
  generated_[Sha256Hex(png)] = std::clamp(fidelity, 0.0, 1.0);
}

void World::MarkSloppyWriter(const std::string& global_caption) {
  std::lock_guard<std::mutex> lock(mu_);
  sloppy_.insert(global_caption);
}

const World::ImageInfo& World::Lookup(const std::string& image_b64, std::string* digest) const {
  const std::string d = Sha256Hex(Base64Decode(image_b64));
  if (digest != nullptr) *digest = d;
  auto it = images_.find(d);
  if (it == images_.end()) throw Error(ErrorCode::kUnknownRequest, "image " + d + " is not in the world");
  return it->second;
}

Json World::Segment(const Json& request) const {
  const ImageInfo& info = Lookup(request["image_b64"].get<std::string>());
  const SceneObject* o = BestMatch(info.objects, JsonBox(request["bbox"]), 0.3);
  if (o != nullptr && info.broken_segment >= 0 &&
      o == &info.objects[static_cast<std::size_t>(info.broken_segment)]) {
    return {{"mask_rle", "1x1:0 1"}};
  }
  if (o == nullptr) {
    Mask empty{info.width, info.height,
               std::vector<std::uint8_t>(static_cast<std::size_t>(info.width) * info.height, 0)};
    return {{"mask_rle", EncodeMaskRle(empty)}};
  }
  return {{"mask_rle", EncodeMaskRle(o->mask)}};
}

Json World::Describe(const Json& request) const {
  const ImageInfo& info = Lookup(request["image_b64"].get<std::string>());
  const Box bounds = DecodeMaskRle(request["mask_rle"].get<std::string>()).Bounds();
  const SceneObject* o = BestMatch(info.objects, bounds, 0.3);
  if (o == nullptr) return {{"caption", "an indistinct region"}};
  return {{"caption", o->caption}};
}

Json World::Write(const Json& request) const {
  const std::string caption = request["global_caption"].get<std::string>();
  const Json& objects = request["objects"];
  const std::size_t n = objects.size();
  Rng rng(Hash(seed_, caption + objects.dump()));
  std::string text = caption + " In it, ";
  Json mapping = Json::array();
  const bool sloppy = sloppy_.contains(caption) && !request.contains("feedback");
  for (std::size_t k = 0; k < n; ++k) {
    const std::string label = objects[k]["label"].get<std::string>();
    if (k > 0) text += k + 1 == n ? " and " : ", ";
    const std::size_t index = sloppy && k + 1 == n ? n + 1 : k + 1;
    text += Article(label) + " [Image" + std::to_string(index) + "] " + label;
    mapping.push_back({{"phrase", label}, {"index", k + 1}});
  }
  text += n == 1 ? " stands alone." : std::string(" ") + Pick(kVerbs, rng) + ".";
  if (sloppy && Hash(seed_, caption) % 2 == 0) {
    // Wrong shape altogether.
    return {{"caption", text}};
  }
  return {{"interleaved_caption", text}, {"mapping", mapping}};
}

Json World::Verify(const Json& request) const {
  const Raster a = DecodePng(Base64Decode(request["image_a_b64"].get<std::string>()));
  const Raster b0 = DecodePng(Base64Decode(request["image_b_b64"].get<std::string>()));
  const Raster b = ResizeBilinear(b0, a.width(), a.height());
  double diff = 0;
  for (std::size_t i = 0; i < a.pixels().size(); ++i) {
    diff += std::abs(static_cast<int>(a.pixels()[i]) - static_cast<int>(b.pixels()[i]));
  }
  diff /= static_cast<double>(a.pixels().size());
  const bool changed = diff > 12.0;
  char reason[96];
  std::snprintf(reason, sizeof(reason), "mean absolute difference %.1f", diff);
  return {{"changed", changed}, {"reason", reason}};
}

Json World::Judge(const Json& request) const {
  const std::string d = Sha256Hex(Base64Decode(request["generated_b64"].get<std::string>()));
  auto it = generated_.find(d);
  const double f = it == generated_.end() ? 0.5 : it->second;
  const int rating = 1 + static_cast<int>(std::lround(4 * f));
  return {{"rating", rating}, {"rationale", "identity preserved at fidelity " + std::to_string(f)}};
}

Json World::Answer(const Json& request) const {
  const std::string d = Sha256Hex(Base64Decode(request["image_b64"].get<std::string>()));
  const std::string question = request["question"].get<std::string>();
  const std::uint64_t h = Hash(seed_, d + "|" + question);
  auto it = generated_.find(d);
  bool yes;
  if (it != generated_.end()) {
    yes = static_cast<double>(h % 1000) / 1000.0 < it->second;
  } else {
    // Compatibility checks over reference strips: mostly compatible.
    yes = h % 5 != 0;
  }
  return {{"answer", yes ? (h % 3 == 0 ? "Yes." : "yes") : (h % 3 == 0 ? "No." : "no")}};
}

Json World::Questions(const Json& request) const {
  Json questions = Json::array();
  const Json& phrases = request["phrases"];
  for (const Json& p : phrases) {
    const std::string phrase = p["phrase"].get<std::string>();
    questions.push_back({{"text", "Does the image contain the " + phrase + " shown in reference " +
                                      std::to_string(p["index"].get<int>()) + "?"},
                         {"kind", "attribute"},
                         {"index", p["index"]}});
  }
  if (phrases.size() >= 2) {
    questions.push_back({{"text", "Do the " + phrases[0]["phrase"].get<std::string>() + " and the " +
                                      phrases[1]["phrase"].get<std::string>() +
                                      " appear together in one scene?"},
                         {"kind", "relation"}});
  }
  return {{"questions", questions}};
}

Json World::Respond(ClientRole role, const Json& request) {
  std::lock_guard<std::mutex> lock(mu_);
  switch (role) {
    case ClientRole::kCaptioner:
      return {{"caption", Lookup(request["image_b64"].get<std::string>()).caption}};
    case ClientRole::kDetector: {
      const ImageInfo& info = Lookup(request["image_b64"].get<std::string>());
      Json dets = Json::array();
      for (const auto& o : info.objects) {
        dets.push_back({{"label", o.label}, {"bbox", BoxJson(o.bbox)}, {"score", 0.9}});
      }
      for (const auto& e : info.extra_detections) dets.push_back(e);
      return {{"detections", dets}};
    }
    case ClientRole::kSegmenter:
      return Segment(request);
    case ClientRole::kRegionDescriber:
      return Describe(request);
    case ClientRole::kInstructionWriter:
      return Write(request);
    case ClientRole::kCorrespondenceVlm: {
      const std::string d = Sha256Hex(Base64Decode(request["image_b64"].get<std::string>()));
      auto it = composites_.find(d);
      return {{"matches", it == composites_.end() ? Json::array() : it->second.matches}};
    }
    case ClientRole::kChangeVerifier:
      return Verify(request);
    case ClientRole::kJudge:
      return Judge(request);
    case ClientRole::kQaAnswerer:
      return Answer(request);
    case ClientRole::kQuestionWriter:
      return Questions(request);
  }
  throw Error(ErrorCode::kUnknownRequest, "unhandled role");
}

clients::Responder World::AsResponder() {
  return [this](ClientRole role, const Json& request) { return Respond(role, request); };
}

}  // namespace forge::synth
