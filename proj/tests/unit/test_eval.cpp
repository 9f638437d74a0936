#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "oracles.hpp"
#include "pixlog/baselines.hpp"
#include "pixlog/builders.hpp"
#include "pixlog/eval.hpp"
#include "pixlog/synth.hpp"
#include "testutil.hpp"

using namespace pixlog;

namespace {

DatasetManifest flat_manifest(std::size_t n, std::size_t e, double fps = 12) {
  DatasetManifest m;
  m.target_fps = fps;
  m.mode = LabelMode::kEvent;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < e; ++i) names.push_back("e" + std::to_string(i));
  m.vocabulary = EventVocabulary(names);
  for (std::size_t i = 0; i < n; ++i) {
    LabeledFrame fr;
    fr.frame_index = static_cast<std::int64_t>(i);
    fr.timestamp = static_cast<double>(i) / fps;
    fr.image_path = "f.ppm";
    fr.events = EventVector(e);
    m.entries.push_back(std::move(fr));
  }
  return m;
}

ImageSource dummy_source() {
  return [](std::size_t, const LabeledFrame&) {
    return FrameImage::make(4, 4, 1, 0);
  };
}

}  // namespace

TEST_CASE("decode applies a strict threshold") {
  auto v = decode_multi_hot({0.9, 0.1, 0.6});
  CHECK(v.test(0));
  CHECK_FALSE(v.test(1));
  CHECK(v.test(2));
}

TEST_CASE("scores exactly at the threshold stay inactive") {
  auto v = decode_multi_hot({0.5, 0.5, 0.5, 0.5});
  CHECK(v.empty_set());
}

TEST_CASE("decode agrees with the exhaustive candidate oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> scores(8);
    for (auto& s : scores)
      s = rng.bernoulli(0.2) ? 0.5 : rng.uniform();  // hit the boundary often
    CHECK(decode_multi_hot(scores) == oracles::decode_exhaustive(scores, 0.5));
  }
}

TEST_CASE("decode is monotone in every score") {
  Rng rng(100);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> scores(6);
    for (auto& s : scores) s = rng.uniform();
    auto base = decode_multi_hot(scores);
    auto bumped = scores;
    const auto i = rng.below(6);
    bumped[i] = std::min(1.0, bumped[i] + rng.uniform() * 0.5);
    auto after = decode_multi_hot(bumped);
    for (std::size_t k = 0; k < 6; ++k)
      if (base.test(k)) CHECK(after.test(k));
  }
}

TEST_CASE("decode config bounds are validated") {
  DecodeConfig bad;
  bad.threshold = 0.0;
  CHECK_THROWS_AS(decode_multi_hot({0.5}, bad), ValidationError);
  bad.threshold = 1.0;
  CHECK_THROWS_AS(decode_multi_hot({0.5}, bad), ValidationError);
}

TEST_CASE("partial accuracy follows the set formula") {
  EventVector both(4);
  CHECK(partial_accuracy(both, both) == 1.0);

  // P={a,b,c}, T={a,b}: union 3, symmetric difference 1
  auto p = EventVector::from_active(5, {0, 1, 2});
  auto t = EventVector::from_active(5, {0, 1});
  CHECK(partial_accuracy(p, t) == Catch::Approx(2.0 / 3.0));
  CHECK(partial_accuracy(p, t) == oracles::partial_accuracy_sets(p, t));
}

TEST_CASE("partial accuracy matches the set oracle on random pairs") {
  Rng rng(101);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t e = 1 + rng.below(16);
    EventVector p(e), t(e);
    for (std::size_t i = 0; i < e; ++i) {
      if (rng.bernoulli(0.3)) p.set(i);
      if (rng.bernoulli(0.3)) t.set(i);
    }
    const double got = partial_accuracy(p, t);
    CHECK(got == oracles::partial_accuracy_sets(p, t));
    CHECK(got == partial_accuracy(t, p));  // symmetry
    CHECK((got == 1.0) == (p == t));
    bool disjoint = true, both_empty = p.empty_set() && t.empty_set();
    for (std::size_t i = 0; i < e; ++i) disjoint = disjoint && !(p.test(i) && t.test(i));
    if (disjoint && !both_empty) CHECK(got == 0.0);
  }
}

TEST_CASE("partial accuracy rejects mismatched lengths") {
  CHECK_THROWS_AS(partial_accuracy(EventVector(3), EventVector(4)),
                  ValidationError);
}

TEST_CASE("single-label accuracy is exact match") {
  CHECK(single_label_accuracy(3, 3) == 1.0);
  CHECK(single_label_accuracy(3, 4) == 0.0);
}

TEST_CASE("k-fold splits 3500 frames into five folds of 700") {
  auto m = flat_manifest(3500, 4);
  auto folds = kfold_split(m, 5);
  REQUIRE(folds.size() == 5);
  for (const auto& [train, test] : folds) {
    CHECK(test.entries.size() == 700);
    CHECK(train.entries.size() == 2800);
  }
}

TEST_CASE("k equal to the frame count is leave-one-out") {
  auto m = flat_manifest(7, 2);
  auto folds = kfold_split(m, 7);
  REQUIRE(folds.size() == 7);
  for (const auto& [train, test] : folds) {
    CHECK(test.entries.size() == 1);
    CHECK(train.entries.size() == 6);
  }
  CHECK_THROWS_AS(kfold_split(m, 8), ValidationError);
  CHECK_THROWS_AS(kfold_split(m, 1), ValidationError);
}

TEST_CASE("test folds are contiguous and partition the dataset") {
  Rng rng(102);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + rng.below(200);
    const auto k =
        static_cast<std::int64_t>(2 + rng.below(std::min<std::uint64_t>(n, 9) - 1));
    auto m = flat_manifest(n, 3);
    auto folds = kfold_split(m, k);
    std::vector<int> seen(n, 0);
    for (const auto& [train, test] : folds) {
      REQUIRE(!test.entries.empty());
      // contiguous: frame indices run without gaps
      for (std::size_t i = 1; i < test.entries.size(); ++i)
        CHECK(test.entries[i].frame_index ==
              test.entries[i - 1].frame_index + 1);
      for (const auto& e : test.entries)
        ++seen[static_cast<std::size_t>(e.frame_index)];
      CHECK(train.entries.size() + test.entries.size() == n);
    }
    for (auto s : seen) CHECK(s == 1);  // pairwise disjoint, full cover
    // sizes differ by at most one
    std::size_t lo = n, hi = 0;
    for (const auto& [train, test] : folds) {
      lo = std::min(lo, test.entries.size());
      hi = std::max(hi, test.entries.size());
    }
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("event-mode holdout keeps a contiguous tail for testing") {
  auto m = flat_manifest(10, 2);
  auto [train, test] = holdout_split(m, 0.5, 1);
  CHECK(train.entries.size() == 5);
  CHECK(test.entries.size() == 5);
  CHECK(train.entries.back().frame_index < test.entries.front().frame_index);
}

TEST_CASE("activity holdout shuffles whole clips") {
  // 100 clips of 3 frames each
  DatasetManifest m;
  m.target_fps = 10;
  m.mode = LabelMode::kActivity;
  m.vocabulary = EventVocabulary({"walk", "run"});
  std::int64_t frame = 0;
  for (int clip = 0; clip < 100; ++clip) {
    for (int j = 0; j < 3; ++j) {
      LabeledFrame fr;
      fr.frame_index = frame;
      fr.timestamp = frame / 10.0;
      fr.image_path = "f.ppm";
      fr.activity = clip % 2;
      m.entries.push_back(fr);
      ++frame;
    }
    frame += 2;  // gap between clips
  }
  auto [train, test] = holdout_split(m, 0.83, 9);
  CHECK(train.entries.size() == 83 * 3);
  CHECK(test.entries.size() == 17 * 3);
  // clips stay whole: every clip's 3 frames land on one side
  auto [train2, test2] = holdout_split(m, 0.83, 9);
  CHECK(train2.entries.size() == train.entries.size());
  for (std::size_t i = 0; i < train.entries.size(); ++i)
    CHECK(train2.entries[i].frame_index == train.entries[i].frame_index);
  auto [train3, test3] = holdout_split(m, 0.83, 10);
  bool different = train3.entries.size() != train.entries.size();
  if (!different)
    for (std::size_t i = 0; i < train.entries.size(); ++i)
      different =
          different || train3.entries[i].frame_index != train.entries[i].frame_index;
  CHECK(different);  // another seed shuffles differently
}

TEST_CASE("holdout rejects degenerate fractions") {
  auto m = flat_manifest(10, 2);
  CHECK_THROWS_AS(holdout_split(m, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(holdout_split(m, 1.0, 1), ValidationError);
  CHECK_THROWS_AS(holdout_split(m, 0.999, 1), ValidationError);  // empty test
}

TEST_CASE("a perfect predictor evaluates to mean 1 std 0") {
  auto m = flat_manifest(50, 3);
  for (std::size_t i = 0; i < m.entries.size(); i += 3)
    m.entries[i].events.set(i % 3);
  Predictor perfect = [&](std::size_t i, const LabeledFrame& e,
                          const FrameImage&) {
    FramePrediction p;
    p.events = e.events;
    return p;
  };
  auto report = evaluate(perfect, m, dummy_source());
  CHECK(report.mean == 1.0);
  CHECK(report.stddev == 0.0);
  CHECK(report.per_frame.size() == 50);
}

TEST_CASE("the no-event predictor scores the empty fraction") {
  auto m = flat_manifest(100, 4);
  for (std::size_t i = 88; i < 100; ++i) m.entries[i].events.set(i % 4);
  Predictor none = [](std::size_t, const LabeledFrame&, const FrameImage&) {
    FramePrediction p;
    p.events = no_event_baseline(4);
    return p;
  };
  auto report = evaluate(none, m, dummy_source());
  CHECK(report.mean == Catch::Approx(0.88));
}

TEST_CASE("report statistics are recomputable from the per-frame list") {
  auto r = report_from_values("partial_accuracy", {1.0, 0.5, 0.75, 1.0});
  const double mean = (1.0 + 0.5 + 0.75 + 1.0) / 4;
  CHECK(r.mean == Catch::Approx(mean));
  double ss = 0;
  for (double v : {1.0, 0.5, 0.75, 1.0}) ss += (v - mean) * (v - mean);
  CHECK(r.stddev == Catch::Approx(std::sqrt(ss / 3)));
}

TEST_CASE("stochastic predictors evaluate reproducibly under a fixed seed") {
  auto m = flat_manifest(60, 5);
  for (std::size_t i = 40; i < 60; ++i) m.entries[i].events.set(i % 5);
  auto run = [&](std::uint64_t seed) {
    Rng rng(seed);
    Predictor random = [&rng](std::size_t, const LabeledFrame&,
                              const FrameImage&) {
      FramePrediction p;
      p.events = random_baseline(5, 3, rng);
      return p;
    };
    return evaluate(random, m, dummy_source());
  };
  auto a = run(7), b = run(7), c = run(8);
  CHECK(a.per_frame == b.per_frame);
  CHECK(a.per_frame != c.per_frame);
}

TEST_CASE("checkpoint evaluation rejects vocabulary mismatches") {
  auto spec = build_event_net(3, NetScale::kDesk);
  auto ckpt = Checkpoint::fresh(spec, 1);
  ckpt.labels = {"x", "y", "z"};
  auto m = flat_manifest(4, 3);  // names e0,e1,e2
  ImageSource src = [](std::size_t, const LabeledFrame&) {
    return FrameImage::make(32, 32, 3, 10);
  };
  CHECK_THROWS_WITH(evaluate_checkpoint(ckpt, m, src),
                    Catch::Matchers::ContainsSubstring("vocabulary"));
  ckpt.labels = {"e0", "e1", "e2"};
  CHECK_NOTHROW(evaluate_checkpoint(ckpt, m, src));
}

TEST_CASE("merged reports keep per-split rows consistent") {
  auto a = report_from_values("partial_accuracy", {1.0, 1.0});
  auto b = report_from_values("partial_accuracy", {0.0, 0.5});
  auto merged = merge_reports({a, b}, {"fold0", "fold1"});
  REQUIRE(merged.splits.size() == 2);
  CHECK(merged.splits[0].mean == 1.0);
  CHECK(merged.splits[1].mean == Catch::Approx(0.25));
  CHECK(merged.per_frame.size() == 4);
  CHECK(merged.mean == Catch::Approx(0.625));
  auto c = report_from_values("single_label_accuracy", {1.0});
  CHECK_THROWS_AS(merge_reports({a, c}, {}), ValidationError);
}

TEST_CASE("reports serialize to text and json") {
  testutil::TempDir tmp;
  auto r = report_from_values("partial_accuracy", {1.0, 0.5});
  r.splits.push_back({"fold0", 0.75, 0.1, 2});
  r.save_text(tmp.path() / "r.txt");
  r.save_json(tmp.path() / "r.json");
  auto text = testutil::read_bytes(tmp.path() / "r.txt");
  CHECK(text.find("metric partial_accuracy") != std::string::npos);
  CHECK(text.find("fold0") != std::string::npos);
  auto json = testutil::read_bytes(tmp.path() / "r.json");
  CHECK(json.find("\"mean\": 0.75") != std::string::npos);
}
