#pragma once

// Deterministic synthetic gameplay: a scrolling background, an avatar and a
// configurable event model. Every labeled event is visually realized in its
// frame (a glyph sprite on the event's lane, plus avatar pose changes for
// the movement events), so the generated manifest is exact ground truth.
// Styles select disjoint palettes and sprite geometry; the event schedule
// depends only on the seed, so restyling a config keeps its logs identical.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pixlog/common.hpp"
#include "pixlog/gamelog.hpp"
#include "pixlog/image.hpp"
#include "pixlog/ingest.hpp"
#include "pixlog/manifest.hpp"

namespace pixlog {

enum class SynthStyle { kA, kB };

inline std::string to_string(SynthStyle s) {
  return s == SynthStyle::kA ? "A" : "B";
}

inline SynthStyle synth_style_from_string(const std::string& s) {
  if (s == "A" || s == "a") return SynthStyle::kA;
  if (s == "B" || s == "b") return SynthStyle::kB;
  throw ValidationError("unknown style '" + s + "' (known styles: A, B)");
}

struct SynthConfig {
  SynthStyle style = SynthStyle::kA;
  int width = 32;
  int height = 32;
  double fps = 12.0;
  double duration_s = 0.0;  // frame count = round(duration_s * fps)
  std::vector<std::string> events;
  std::vector<double> rates;  // relative occurrence weights, >= 0
  std::int64_t max_cooccurring = 3;
  double empty_fraction = 0.88;  // target fraction of event-free frames
  std::uint64_t seed = 0;

  std::int64_t frame_count() const {
    return std::llround(duration_s * fps);
  }

  // Lane capacity: two glyph rows across the top of the screen.
  std::int64_t max_events_for_resolution() const {
    return 2 * ((width - 2) / 5);
  }

  void validate() const {
    if (width < 16 || height < 16)
      throw ValidationError("synth resolution must be at least 16x16");
    if (!(fps > 0)) throw ValidationError("synth fps must be > 0");
    if (frame_count() < 1) throw ValidationError("synth duration too short");
    if (events.empty()) throw ValidationError("synth needs at least one event");
    if (rates.size() != events.size())
      throw ValidationError("rates must match the event list");
    for (double r : rates)
      if (r < 0) throw ValidationError("event rates must be >= 0");
    if (!(empty_fraction >= 0.0 && empty_fraction < 1.0))
      throw ValidationError("empty_fraction must lie in [0,1)");
    if (max_cooccurring < 0 ||
        max_cooccurring > static_cast<std::int64_t>(events.size()))
      throw ValidationError("max_cooccurring must lie in [0, E]");
    if (static_cast<std::int64_t>(events.size()) >
        max_events_for_resolution())
      throw ValidationError(
          "too many event types for this resolution (capacity " +
          std::to_string(max_events_for_resolution()) + ")");
    EventVocabulary check(events);  // name rules + uniqueness
  }
};

// The stock event list mirrors small platformer telemetry; the first five
// are the shared transfer classes.
inline SynthConfig default_synth_config(SynthStyle style, std::uint64_t seed,
                                        std::int64_t frames = 3500) {
  SynthConfig c;
  c.style = style;
  c.seed = seed;
  c.events = {"move_right", "move_left", "jump",    "shoot",
              "collect",    "enemy_hit", "powerup", "door"};
  c.rates.assign(c.events.size(), 1.0);
  c.duration_s = static_cast<double>(frames) / c.fps;
  return c;
}

// Same event model and seed schedule, different look. Ground-truth logs are
// identical across styles by construction.
inline SynthConfig style_shift(const SynthConfig& config, SynthStyle new_style) {
  if (config.style == new_style)
    throw ValidationError("style_shift requires a different style");
  SynthConfig out = config;
  out.style = new_style;
  return out;
}

namespace synth_detail {

struct Rgb {
  std::uint8_t r, g, b;
};

struct Palette {
  Rgb bg0, bg1, scroll, avatar;
  std::array<Rgb, 12> event_colors;
};

inline const Palette& palette(SynthStyle style) {
  static const Palette a = {
      {24, 26, 40},
      {32, 36, 52},
      {48, 52, 72},
      {220, 60, 40},
      {{{250, 200, 40},
        {70, 200, 70},
        {80, 160, 250},
        {240, 90, 200},
        {90, 230, 230},
        {250, 140, 60},
        {180, 120, 250},
        {240, 240, 240},
        {160, 200, 60},
        {60, 120, 120},
        {200, 60, 120},
        {120, 90, 40}}}};
  static const Palette b = {
      {40, 30, 30},
      {54, 40, 36},
      {80, 64, 48},
      {60, 90, 220},
      {{{140, 250, 180},
        {255, 120, 120},
        {255, 255, 130},
        {130, 255, 60},
        {200, 160, 255},
        {120, 220, 255},
        {255, 200, 160},
        {20, 20, 20},
        {100, 255, 220},
        {255, 60, 255},
        {160, 160, 90},
        {90, 40, 90}}}};
  return style == SynthStyle::kA ? a : b;
}

inline void put(FrameImage& img, int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  img.at(x, y, 0) = c.r;
  img.at(x, y, 1) = c.g;
  img.at(x, y, 2) = c.b;
}

// size x size sprite; style A draws solid squares, style B diamonds.
inline int draw_sprite(FrameImage& img, int x, int y, int size, Rgb c,
                       SynthStyle style) {
  int changed = 0;
  const int mid = size / 2;
  for (int dy = 0; dy < size; ++dy)
    for (int dx = 0; dx < size; ++dx) {
      if (style == SynthStyle::kB &&
          std::abs(dx - mid) + std::abs(dy - mid) > mid)
        continue;
      const int px = x + dx, py = y + dy;
      if (px < 0 || py < 0 || px >= img.width || py >= img.height) continue;
      if (img.at(px, py, 0) != c.r || img.at(px, py, 1) != c.g ||
          img.at(px, py, 2) != c.b)
        ++changed;
      put(img, px, py, c);
    }
  return changed;
}

}  // namespace synth_detail

// Pure function of (config, frame index, label): background scroll, avatar
// pose, one glyph per active event on its lane.
inline FrameImage render_synth_frame(const SynthConfig& config,
                                     std::int64_t t,
                                     const EventVector& label) {
  using synth_detail::draw_sprite;
  using synth_detail::palette;
  using synth_detail::put;
  const auto& pal = palette(config.style);
  FrameImage img = FrameImage::make(config.width, config.height, 3);
  for (int y = 0; y < config.height; ++y)
    for (int x = 0; x < config.width; ++x) {
      const bool stripe = ((x + static_cast<int>(t % 1000)) % 10) < 2;
      put(img, x, y, stripe ? pal.scroll : (y < config.height / 2 ? pal.bg0 : pal.bg1));
    }

  // avatar: idle at the bottom center; movement events shift or raise it
  const int ax = config.width / 2 - 3;
  const int ay = config.height - 8;
  const bool right = label.size() > 0 && label.test(0);
  const bool left = label.size() > 1 && label.test(1);
  const bool jump = label.size() > 2 && label.test(2);
  const int dy = jump ? -4 : 0;
  if (right) draw_sprite(img, ax + 3, ay + dy, 6, pal.avatar, config.style);
  if (left) draw_sprite(img, ax - 3, ay + dy, 6, pal.avatar, config.style);
  if (!right && !left) draw_sprite(img, ax, ay + dy, 6, pal.avatar, config.style);

  // one glyph per active event, lanes across the top, slight deterministic
  // wobble so glyph positions are not single fixed pixels
  const int lanes_per_row = (config.width - 2) / 5;
  for (std::size_t k = 0; k < label.size(); ++k) {
    if (!label.test(k)) continue;
    const int lane = static_cast<int>(k) % lanes_per_row;
    const int row = static_cast<int>(k) / lanes_per_row;
    const int wob = static_cast<int>((t + static_cast<std::int64_t>(k)) % 3) - 1;
    const int gx = 1 + lane * 5 + wob;
    const int gy = 1 + row * 6;
    const int changed =
        draw_sprite(img, gx, gy, 4,
                    pal.event_colors[k % pal.event_colors.size()],
                    config.style);
    if (changed == 0)
      throw std::logic_error("synth renderer failed to realize event " +
                             std::to_string(k) + " at frame " +
                             std::to_string(t));
  }
  return img;
}

struct SynthResult {
  DatasetManifest manifest;  // image paths filled by write_synth_dataset
  GameLog truth;
  std::vector<FrameImage> frames;
};

inline SynthResult generate(const SynthConfig& config) {
  config.validate();
  const std::int64_t n = config.frame_count();
  const std::size_t e = config.events.size();
  const std::int64_t empty_n =
      std::llround(static_cast<double>(n) * config.empty_fraction);
  const std::int64_t active_n = n - empty_n;

  std::size_t positive_rates = 0;
  for (double r : config.rates)
    if (r > 0) ++positive_rates;
  if (active_n > 0 && (config.max_cooccurring < 1 || positive_rates == 0))
    throw ValidationError(
        "infeasible synth config: the event model cannot produce the "
        "requested non-empty frames");

  // choose which frames carry events
  Rng rng(config.seed);
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  std::vector<bool> active(static_cast<std::size_t>(n), false);
  for (std::int64_t i = 0; i < active_n; ++i)
    active[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;

  std::vector<EventVector> labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (std::int64_t t = 0; t < n; ++t) {
    EventVector label(e);
    if (active[static_cast<std::size_t>(t)]) {
      Rng frame_rng = Rng(config.seed).fork(static_cast<std::uint64_t>(t));
      auto cap = std::min<std::int64_t>(
          config.max_cooccurring, static_cast<std::int64_t>(positive_rates));
      const auto count = 1 + static_cast<std::int64_t>(frame_rng.below(
                                 static_cast<std::uint64_t>(cap)));
      std::vector<double> weights = config.rates;
      for (std::int64_t c = 0; c < count; ++c) {
        std::vector<std::size_t> candidates;
        double total = 0;
        for (std::size_t k = 0; k < weights.size(); ++k)
          if (weights[k] > 0) {
            candidates.push_back(k);
            total += weights[k];
          }
        if (candidates.empty()) break;
        double u = frame_rng.uniform() * total;
        std::size_t pick = candidates.back();  // fp round-off fallback
        for (std::size_t k : candidates) {
          u -= weights[k];
          if (u < 0) {
            pick = k;
            break;
          }
        }
        label.set(pick);
        weights[pick] = 0;  // without replacement
      }
    }
    labels.push_back(std::move(label));
  }

  SynthResult result;
  result.frames.reserve(static_cast<std::size_t>(n));
  result.manifest.target_fps = config.fps;
  result.manifest.mode = LabelMode::kEvent;
  result.manifest.vocabulary = EventVocabulary(config.events);
  for (std::int64_t t = 0; t < n; ++t) {
    result.frames.push_back(
        render_synth_frame(config, t, labels[static_cast<std::size_t>(t)]));
    LabeledFrame fr;
    fr.frame_index = t;
    fr.timestamp = static_cast<double>(t) / config.fps;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frames/%06lld.ppm",
                  static_cast<long long>(t));
    fr.image_path = buf;
    fr.events = labels[static_cast<std::size_t>(t)];
    result.manifest.entries.push_back(std::move(fr));
  }
  result.truth = emit_log(labels, config.fps, result.manifest.vocabulary);
  result.manifest.validate();
  return result;
}

inline ImageSource memory_image_source(const std::vector<FrameImage>& frames) {
  return [&frames](std::size_t index, const LabeledFrame&) {
    if (index >= frames.size())
      throw ValidationError("frame index outside the in-memory sequence");
    return frames[index];
  };
}

// Persists a generated dataset: frames/, manifest.txt, truth.log. The truth
// log records the hash of the manifest file it belongs to.
inline std::filesystem::path write_synth_dataset(
    SynthResult& result, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "frames");
  for (std::size_t t = 0; t < result.frames.size(); ++t)
    save_image(result.frames[t], dir / result.manifest.entries[t].image_path);
  const fs::path manifest_path = dir / "manifest.txt";
  save_manifest(result.manifest, manifest_path);
  {
    std::ifstream in(manifest_path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    result.truth.source_hash = fnv1a64(bytes);
  }
  save_log(result.truth, dir / "truth.log");
  return manifest_path;
}

}  // namespace pixlog
