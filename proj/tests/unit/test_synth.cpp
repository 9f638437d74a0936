#include <catch2/catch_amalgamated.hpp>
#include <set>

#include "oracles.hpp"
#include "pixlog/synth.hpp"
#include "testutil.hpp"

using namespace pixlog;

namespace {

SynthConfig make_config(SynthStyle style, std::size_t events,
                        std::uint64_t seed, std::int64_t frames,
                        double empty) {
  auto cfg = default_synth_config(style, seed, frames);
  cfg.events.resize(events);
  cfg.rates.resize(events);
  cfg.max_cooccurring =
      std::min<std::int64_t>(3, static_cast<std::int64_t>(events));
  cfg.empty_fraction = empty;
  return cfg;
}

}  // namespace

TEST_CASE("generation is byte-deterministic in the seed") {
  auto cfg = make_config(SynthStyle::kA, 6, 77, 120, 0.6);
  auto a = generate(cfg);
  auto b = generate(cfg);
  REQUIRE(a.frames.size() == b.frames.size());
  for (std::size_t t = 0; t < a.frames.size(); ++t)
    CHECK(a.frames[t].data == b.frames[t].data);
  for (std::size_t t = 0; t < a.manifest.entries.size(); ++t)
    CHECK(a.manifest.entries[t].events == b.manifest.entries[t].events);
  auto c = generate(make_config(SynthStyle::kA, 6, 78, 120, 0.6));
  bool all_same = true;
  for (std::size_t t = 0; t < a.frames.size() && all_same; ++t)
    all_same = a.frames[t].data == c.frames[t].data;
  CHECK_FALSE(all_same);
}

TEST_CASE("all-zero rates produce only background scroll") {
  auto cfg = make_config(SynthStyle::kA, 4, 5, 100, 0.6);
  cfg.rates.assign(4, 0.0);
  cfg.empty_fraction = 0.996;  // rounds to zero active frames
  auto res = generate(cfg);
  for (const auto& e : res.manifest.entries) CHECK(e.events.empty_set());
  // zero-event frames repeat with the scroll period and differ inside it
  CHECK(res.frames[0].data == res.frames[10].data);
  CHECK(res.frames[0].data != res.frames[1].data);
}

TEST_CASE("configs that need events but cannot draw any are rejected") {
  auto cfg = make_config(SynthStyle::kA, 4, 5, 100, 0.5);
  cfg.rates.assign(4, 0.0);
  CHECK_THROWS_WITH(generate(cfg),
                    Catch::Matchers::ContainsSubstring("infeasible"));
  auto cfg2 = make_config(SynthStyle::kA, 4, 5, 100, 0.5);
  cfg2.max_cooccurring = 0;
  CHECK_THROWS_AS(generate(cfg2), ValidationError);
}

TEST_CASE("the empirical empty fraction tracks the target") {
  auto cfg = make_config(SynthStyle::kA, 8, 6, 3500, 0.88);
  auto res = generate(cfg);
  const double frac = res.manifest.empty_fraction();
  CHECK(frac >= 0.86);
  CHECK(frac <= 0.90);
  // the construction rounds to the frame count, so the match is tight
  CHECK(frac == Catch::Approx(0.88).margin(0.001));
}

TEST_CASE("co-occurrence never exceeds the cap") {
  auto cfg = make_config(SynthStyle::kA, 7, 7, 400, 0.3);
  cfg.max_cooccurring = 2;
  auto res = generate(cfg);
  CHECK(res.manifest.max_cooccurrence() <= 2);
  bool saw_two = false;
  for (const auto& e : res.manifest.entries)
    saw_two = saw_two || e.events.count() == 2;
  CHECK(saw_two);
}

TEST_CASE("zero rates exclude an event entirely") {
  auto cfg = make_config(SynthStyle::kA, 5, 8, 300, 0.4);
  cfg.rates[2] = 0.0;
  auto res = generate(cfg);
  for (const auto& e : res.manifest.entries) CHECK_FALSE(e.events.test(2));
}

TEST_CASE("rendering is a pure function of config, index and label") {
  auto cfg = make_config(SynthStyle::kB, 5, 9, 60, 0.5);
  auto res = generate(cfg);
  for (std::size_t t = 0; t < res.frames.size(); ++t) {
    auto again = render_synth_frame(cfg, static_cast<std::int64_t>(t),
                                    res.manifest.entries[t].events);
    CHECK(again.data == res.frames[t].data);
  }
}

TEST_CASE("every labeled event changes pixels relative to the eventless frame") {
  auto cfg = make_config(SynthStyle::kA, 8, 10, 200, 0.5);
  auto res = generate(cfg);
  const std::size_t e = cfg.events.size();
  for (std::size_t t = 0; t < res.frames.size(); ++t) {
    const auto& label = res.manifest.entries[t].events;
    if (label.empty_set()) continue;
    auto base = render_synth_frame(cfg, static_cast<std::int64_t>(t),
                                   EventVector(e));
    CHECK(base.data != res.frames[t].data);
    // dropping any single active event changes the render
    for (std::size_t k = 0; k < e; ++k) {
      if (!label.test(k)) continue;
      EventVector reduced = label;
      reduced.set(k, false);
      auto without = render_synth_frame(cfg, static_cast<std::int64_t>(t),
                                        reduced);
      CHECK(without.data != res.frames[t].data);
    }
  }
}

TEST_CASE("style shift keeps the ground-truth logs identical") {
  auto cfg_a = make_config(SynthStyle::kA, 6, 11, 250, 0.6);
  auto cfg_b = style_shift(cfg_a, SynthStyle::kB);
  auto a = generate(cfg_a);
  auto b = generate(cfg_b);
  REQUIRE(a.manifest.entries.size() == b.manifest.entries.size());
  for (std::size_t t = 0; t < a.manifest.entries.size(); ++t)
    CHECK(a.manifest.entries[t].events == b.manifest.entries[t].events);
  auto ra = rasterize_log(a.truth);
  auto rb = rasterize_log(b.truth);
  CHECK(ra == rb);
}

TEST_CASE("styles render with disjoint palettes") {
  auto cfg_a = make_config(SynthStyle::kA, 8, 12, 40, 0.4);
  auto cfg_b = style_shift(cfg_a, SynthStyle::kB);
  auto a = generate(cfg_a);
  auto b = generate(cfg_b);
  std::set<std::array<std::uint8_t, 3>> colors_a, colors_b;
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    const auto& fa = a.frames[t];
    const auto& fb = b.frames[t];
    for (int y = 0; y < fa.height; ++y)
      for (int x = 0; x < fa.width; ++x) {
        colors_a.insert({fa.at(x, y, 0), fa.at(x, y, 1), fa.at(x, y, 2)});
        colors_b.insert({fb.at(x, y, 0), fb.at(x, y, 1), fb.at(x, y, 2)});
      }
  }
  for (const auto& c : colors_a) CHECK(colors_b.count(c) == 0);
}

TEST_CASE("restyled frames differ exactly where sprites or background differ") {
  auto cfg_a = make_config(SynthStyle::kA, 5, 13, 30, 0.5);
  auto cfg_b = style_shift(cfg_a, SynthStyle::kB);
  auto a = generate(cfg_a);
  auto b = generate(cfg_b);
  // disjoint palettes make every pixel differ; sprite pixels in particular
  for (std::size_t t = 0; t < a.frames.size(); ++t)
    CHECK(a.frames[t].data != b.frames[t].data);
}

TEST_CASE("style shift requires an actual change") {
  auto cfg = make_config(SynthStyle::kA, 4, 14, 30, 0.5);
  CHECK_THROWS_AS(style_shift(cfg, SynthStyle::kA), ValidationError);
  CHECK_NOTHROW(style_shift(cfg, SynthStyle::kB));
  CHECK_THROWS_AS(synth_style_from_string("C"), ValidationError);
}

TEST_CASE("too many event types for the resolution are rejected") {
  auto cfg = make_config(SynthStyle::kA, 8, 15, 30, 0.5);
  cfg.width = 16;
  cfg.height = 16;  // capacity 2 * ((16-2)/5) = 4 lanes
  CHECK_THROWS_WITH(generate(cfg),
                    Catch::Matchers::ContainsSubstring("capacity"));
}

TEST_CASE("datasets persist with frames, manifest and truth log") {
  testutil::TempDir tmp;
  auto cfg = make_config(SynthStyle::kA, 5, 16, 40, 0.5);
  auto res = generate(cfg);
  auto manifest_path = write_synth_dataset(res, tmp.path());
  auto manifest = load_manifest(manifest_path);
  CHECK(manifest.size() == 40);
  auto truth = load_log(tmp.path() / "truth.log");
  CHECK(truth.frame_count == 40);
  CHECK(truth.source_hash ==
        fnv1a64(testutil::read_bytes(manifest_path)));
  // every referenced image exists and decodes to the generated frame
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    auto img = load_entry_image(manifest, tmp.path(), manifest.entries[i]);
    CHECK(img.data == res.frames[i].data);
  }
  // labels in the manifest equal the ground-truth log exactly
  auto raster = rasterize_log(truth);
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    CHECK(manifest.entries[i].events == raster[i]);
}
