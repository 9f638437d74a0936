#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "oracles.hpp"
#include "pixlog/baselines.hpp"
#include "pixlog/forest.hpp"
#include "pixlog/metrics.hpp"
#include "pixlog/synth.hpp"
#include "testutil.hpp"

using namespace pixlog;

namespace {

DataSet synth_dataset(std::size_t events, std::uint64_t seed,
                      std::int64_t frames, double empty,
                      std::vector<FrameImage>* frames_out = nullptr,
                      DatasetManifest* manifest_out = nullptr) {
  auto cfg = default_synth_config(SynthStyle::kA, seed, frames);
  cfg.events.resize(events);
  cfg.rates.resize(events);
  cfg.max_cooccurring =
      std::min<std::int64_t>(3, static_cast<std::int64_t>(events));
  cfg.empty_fraction = empty;
  auto res = generate(cfg);
  ModelSpec probe = build_event_net(static_cast<std::int64_t>(events),
                                    NetScale::kDesk);
  auto ds = make_dataset(res.manifest, probe, memory_image_source(res.frames));
  if (frames_out) *frames_out = std::move(res.frames);
  if (manifest_out) *manifest_out = res.manifest;
  return ds;
}

}  // namespace

TEST_CASE("the stock forest has ten trees and respects depth 100") {
  auto ds = synth_dataset(5, 11, 150, 0.6);
  ForestConfig cfg;
  cfg.seed = 12;
  auto forest = train_forest(ds, cfg);
  REQUIRE(forest.trees.size() == 10);
  for (std::size_t t = 0; t < forest.trees.size(); ++t)
    CHECK(forest.tree_depth(t) <= 100);
}

TEST_CASE("tight depth limits are honored by every tree") {
  auto ds = synth_dataset(5, 21, 200, 0.5);
  ForestConfig cfg;
  cfg.max_depth = 3;
  cfg.seed = 22;
  auto forest = train_forest(ds, cfg);
  for (std::size_t t = 0; t < forest.trees.size(); ++t)
    CHECK(forest.tree_depth(t) <= 3);
}

TEST_CASE("a single-frame dataset makes every tree predict its label") {
  auto cfg = default_synth_config(SynthStyle::kA, 31, 60);
  cfg.events.resize(4);
  cfg.rates.resize(4);
  cfg.empty_fraction = 0.0;
  cfg.max_cooccurring = 2;
  auto res = generate(cfg);
  ModelSpec probe = build_event_net(4, NetScale::kDesk);
  auto full = make_dataset(res.manifest, probe, memory_image_source(res.frames));
  // keep one frame with a non-empty label
  DataSet one;
  one.mode = full.mode;
  one.n = 1;
  one.sample_numel = full.sample_numel;
  one.streams = 1;
  std::size_t pick = 0;
  while (full.events[pick].empty_set()) ++pick;
  one.x0.assign(full.x0.begin() + pick * full.sample_numel,
                full.x0.begin() + (pick + 1) * full.sample_numel);
  one.events.push_back(full.events[pick]);

  ForestConfig fcfg;
  fcfg.seed = 32;
  auto forest = train_forest(one, fcfg);
  for (const auto& tree : forest.trees) {
    REQUIRE(tree.size() == 1);
    CHECK(tree[0].votes == full.events[pick]);
  }
  std::vector<float> x(one.x0.begin(), one.x0.end());
  CHECK(predict_forest_features(forest, x) == full.events[pick]);
}

TEST_CASE("forest training and prediction are deterministic under a seed") {
  std::vector<FrameImage> frames;
  auto ds = synth_dataset(5, 41, 180, 0.6, &frames);
  ForestConfig cfg;
  cfg.seed = 42;
  auto a = train_forest(ds, cfg);
  auto b = train_forest(ds, cfg);
  REQUIRE(a.trees.size() == b.trees.size());
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    REQUIRE(a.trees[t].size() == b.trees[t].size());
    for (std::size_t n = 0; n < a.trees[t].size(); ++n) {
      CHECK(a.trees[t][n].feature == b.trees[t][n].feature);
      CHECK(a.trees[t][n].threshold == b.trees[t][n].threshold);
      CHECK(a.trees[t][n].votes == b.trees[t][n].votes);
    }
  }
  for (std::int64_t i = 0; i < ds.n; ++i) {
    std::vector<float> x(ds.x0.begin() + i * ds.sample_numel,
                         ds.x0.begin() + (i + 1) * ds.sample_numel);
    CHECK(predict_forest_features(a, x) == predict_forest_features(b, x));
  }
}

TEST_CASE("unanimous and split votes follow the documented tie rule") {
  Forest forest;
  forest.events = 4;
  forest.features = 2;
  forest.input_h = 1;
  forest.input_w = 2;
  forest.input_c = 1;
  auto leaf = [&](const std::vector<std::size_t>& active) {
    ForestNode n;
    n.votes = EventVector::from_active(4, active);
    return std::vector<ForestNode>{n};
  };
  // 10 trees: all vote event 3; exactly 5 vote event 0; 6 vote event 1
  for (int t = 0; t < 10; ++t) {
    std::vector<std::size_t> active = {3};
    if (t < 5) active.push_back(0);
    if (t < 6) active.push_back(1);
    forest.trees.push_back(leaf(active));
  }
  auto pred = predict_forest_features(forest, {0.0f, 0.0f});
  CHECK(pred.test(3));         // unanimous
  CHECK_FALSE(pred.test(0));   // exact half resolves inactive
  CHECK(pred.test(1));         // strict majority
  CHECK_FALSE(pred.test(2));
}

TEST_CASE("training frames are reproduced by an unpruned forest") {
  // Dataset of repeated distinct frame types so bootstrap samples almost
  // surely contain every type; the exact-fit single-tree oracle confirms
  // the data is consistent before asking the forest to match it.
  std::vector<FrameImage> frames;
  DatasetManifest manifest;
  auto cfg = default_synth_config(SynthStyle::kA, 51, 48);
  cfg.events.resize(4);
  cfg.rates.resize(4);
  cfg.empty_fraction = 0.25;
  cfg.max_cooccurring = 1;
  auto res = generate(cfg);
  ModelSpec probe = build_event_net(4, NetScale::kDesk);
  auto ds = make_dataset(res.manifest, probe, memory_image_source(res.frames));

  std::vector<std::vector<float>> x;
  std::vector<EventVector> y;
  for (std::int64_t i = 0; i < ds.n; ++i) {
    x.emplace_back(ds.x0.begin() + i * ds.sample_numel,
                   ds.x0.begin() + (i + 1) * ds.sample_numel);
    y.push_back(ds.events[static_cast<std::size_t>(i)]);
  }
  auto oracle = oracles::ExactTree::fit(x, y);
  for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(oracle.predict(x[i]) == y[i]);

  ForestConfig fcfg;
  fcfg.tree_count = 25;
  fcfg.seed = 52;
  auto forest = train_forest(ds, fcfg);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (predict_forest_features(forest, x[i]) == y[i]) ++hits;
  CHECK(hits == x.size());
}

TEST_CASE("forests reject mismatched resolutions and empty datasets") {
  auto ds = synth_dataset(4, 61, 60, 0.5);
  ForestConfig cfg;
  cfg.seed = 62;
  auto forest = train_forest(ds, cfg);
  forest.input_h = 32;
  forest.input_w = 32;
  forest.input_c = 3;
  CHECK_THROWS_AS(predict_forest(forest, FrameImage::make(16, 16, 3)),
                  ValidationError);
  DataSet empty;
  empty.mode = LabelMode::kEvent;
  CHECK_THROWS_AS(train_forest(empty, cfg), ValidationError);
}

TEST_CASE("forests round-trip through their text format") {
  testutil::TempDir tmp;
  auto ds = synth_dataset(5, 71, 120, 0.6);
  ForestConfig cfg;
  cfg.seed = 72;
  auto forest = train_forest(ds, cfg);
  forest.input_h = 32;
  forest.input_w = 32;
  forest.input_c = 3;
  auto p1 = tmp.path() / "f1";
  auto p2 = tmp.path() / "f2";
  save_forest(forest, p1);
  auto back = load_forest(p1);
  save_forest(back, p2);
  CHECK(testutil::read_bytes(p1) == testutil::read_bytes(p2));
  for (std::int64_t i = 0; i < std::min<std::int64_t>(ds.n, 40); ++i) {
    std::vector<float> x(ds.x0.begin() + i * ds.sample_numel,
                         ds.x0.begin() + (i + 1) * ds.sample_numel);
    CHECK(predict_forest_features(back, x) ==
          predict_forest_features(forest, x));
  }
}

TEST_CASE("random baseline with zero co-occurrence always predicts nothing") {
  Rng rng(81);
  for (int i = 0; i < 50; ++i)
    CHECK(random_baseline(8, 0, rng).empty_set());
}

TEST_CASE("random baseline set-bit counts are uniform over 0..m") {
  const std::size_t e = 12, m = 4, draws = 100000;
  Rng rng(82);
  std::vector<std::size_t> hist(m + 1, 0);
  for (std::size_t i = 0; i < draws; ++i)
    ++hist[random_baseline(e, m, rng).count()];
  const double expect = static_cast<double>(draws) / (m + 1);
  const double sigma = std::sqrt(expect * (1.0 - 1.0 / (m + 1)));
  for (std::size_t c = 0; c <= m; ++c)
    CHECK(std::abs(static_cast<double>(hist[c]) - expect) < 3 * sigma);
}

TEST_CASE("random subsets are uniform across events") {
  const std::size_t e = 6, draws = 60000;
  Rng rng(83);
  std::vector<std::size_t> per_event(e, 0);
  for (std::size_t i = 0; i < draws; ++i) {
    auto v = random_baseline(e, 3, rng);
    for (std::size_t k = 0; k < e; ++k)
      if (v.test(k)) ++per_event[k];
  }
  // each event appears with equal probability by symmetry
  const double mean =
      static_cast<double>(std::accumulate(per_event.begin(), per_event.end(),
                                          std::size_t{0})) /
      static_cast<double>(e);
  for (std::size_t k = 0; k < e; ++k)
    CHECK(std::abs(static_cast<double>(per_event[k]) - mean) < 4 * std::sqrt(mean));
}

TEST_CASE("random baseline validates its bounds") {
  Rng rng(84);
  CHECK_THROWS_AS(random_baseline(4, 5, rng), ValidationError);
}

TEST_CASE("a uniform random guesser over ten classes sits near 10%") {
  Rng rng(85);
  double acc = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    const auto truth = static_cast<std::int64_t>(rng.below(10));
    const auto guess = static_cast<std::int64_t>(rng.below(10));
    acc += single_label_accuracy(guess, truth);
  }
  acc /= trials;
  CHECK(acc > 0.07);
  CHECK(acc < 0.13);
}

TEST_CASE("the no-event baseline always returns the zero vector") {
  for (std::size_t e : {1u, 5u, 30u}) CHECK(no_event_baseline(e).empty_set());
}

TEST_CASE("no-event scores exactly the empty-frame fraction") {
  // 88% empty (the Gwario-like imbalance)
  {
    double total = 0;
    for (int i = 0; i < 100; ++i) {
      EventVector truth(6);
      if (i >= 88) truth.set(static_cast<std::size_t>(i % 6));
      total += partial_accuracy(no_event_baseline(6), truth);
    }
    CHECK(total / 100 == Catch::Approx(0.88));
  }
  // 73.78% empty (the Mega Man-like imbalance)
  {
    double total = 0;
    for (int i = 0; i < 10000; ++i) {
      EventVector truth(5);
      if (i >= 7378) truth.set(static_cast<std::size_t>(i % 5));
      total += partial_accuracy(no_event_baseline(5), truth);
    }
    CHECK(total / 10000 == Catch::Approx(0.7378));
  }
}

TEST_CASE("ordering on an imbalanced set: no-event above random") {
  // On heavily empty data the no-event baseline dominates the random one;
  // the learned models are compared against both in the acceptance suite.
  Rng rng(86);
  double rand_acc = 0, none_acc = 0;
  const int n = 5000;
  for (int i = 0; i < n; ++i) {
    EventVector truth(30);
    if (i % 100 >= 88) truth.set(static_cast<std::size_t>(i % 30));
    rand_acc += partial_accuracy(random_baseline(30, 5, rng), truth);
    none_acc += partial_accuracy(no_event_baseline(30), truth);
  }
  rand_acc /= n;
  none_acc /= n;
  CHECK(none_acc == Catch::Approx(0.88));
  CHECK(rand_acc < 0.25);
  CHECK(none_acc > rand_acc);
}
