#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "pixlog/builders.hpp"
#include "pixlog/synth.hpp"
#include "pixlog/transfer.hpp"
#include "testutil.hpp"

using namespace pixlog;

namespace {

DataSet synth_dataset(const SynthConfig& cfg, const ModelSpec& spec) {
  auto res = generate(cfg);
  return make_dataset(res.manifest, spec, memory_image_source(res.frames));
}

SynthConfig small_config(SynthStyle style, std::size_t events,
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

TEST_CASE("students copy every non-final parameter bit-exactly") {
  auto teacher = Checkpoint::fresh(build_event_net(30, NetScale::kDesk), 41);
  teacher.labels = {"a"};
  auto student = make_student(teacher, 5, 99);
  Graph g(student.spec);
  const int fw = g.final_dense_weight();
  CHECK(student.spec.output_size == 5);
  CHECK(student.labels.empty());
  REQUIRE(student.params.size() == teacher.params.size());
  for (std::size_t i = 0; i < student.params.size(); ++i) {
    if (static_cast<int>(i) == fw || static_cast<int>(i) == fw + 1) continue;
    CHECK(student.params[i].data == teacher.params[i].data);
  }
  CHECK(student.params[static_cast<std::size_t>(fw)].shape ==
        (std::vector<std::int64_t>{
            5, teacher.params[static_cast<std::size_t>(fw)].shape[1]}));
}

TEST_CASE("a 101-class teacher yields a 10-class student") {
  auto teacher = Checkpoint::fresh(build_activity_net(101, false, 6, 16), 3);
  auto student = make_student(teacher, 10, 4);
  CHECK(student.spec.output_size == 10);
  Graph g(student.spec);
  CHECK(g.params()[static_cast<std::size_t>(g.final_dense_weight())].shape[0] ==
        10);
}

TEST_CASE("resizing to the same width still reinitializes the head") {
  auto teacher = Checkpoint::fresh(build_event_net(8, NetScale::kDesk), 7);
  auto student = make_student(teacher, 8, 1234);
  Graph g(student.spec);
  const auto fw = static_cast<std::size_t>(g.final_dense_weight());
  for (std::size_t i = 0; i < student.params.size(); ++i) {
    if (i == fw) {
      CHECK(student.params[i].data != teacher.params[i].data);
    } else if (i != fw + 1) {
      CHECK(student.params[i].data == teacher.params[i].data);
    }
  }
}

TEST_CASE("make_student is deterministic in (teacher, size, seed)") {
  auto teacher = Checkpoint::fresh(build_event_net(6, NetScale::kDesk), 2);
  auto a = make_student(teacher, 3, 50);
  auto b = make_student(teacher, 3, 50);
  auto c = make_student(teacher, 3, 51);
  Graph g(a.spec);
  const auto fw = static_cast<std::size_t>(g.final_dense_weight());
  CHECK(a.params[fw].data == b.params[fw].data);
  CHECK(a.params[fw].data != c.params[fw].data);
}

TEST_CASE("student output sizes are validated") {
  auto teacher = Checkpoint::fresh(build_event_net(6, NetScale::kDesk), 2);
  CHECK_THROWS_AS(make_student(teacher, 0, 1), ValidationError);
  auto activity = Checkpoint::fresh(build_activity_net(5, false, 6, 16), 2);
  CHECK_THROWS_AS(make_student(activity, 1, 1), ValidationError);
}

TEST_CASE("the frozen mask covers everything except the final layer") {
  auto spec = build_event_net(30, NetScale::kDesk);
  Graph g(spec);
  auto mask = final_layer_only_mask(g);
  auto flags = mask.flags_for(g);
  std::int64_t trainable_params = 0, frozen_params = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    const auto n = Tensor::numel_of(g.params()[i].shape);
    (flags[i] ? trainable_params : frozen_params) += n;
  }
  // shape arithmetic: the final layer holds out*in weights plus out biases
  const auto& w = g.params()[static_cast<std::size_t>(g.final_dense_weight())];
  const std::int64_t expected_trainable = w.shape[0] * w.shape[1] + w.shape[0];
  CHECK(trainable_params == expected_trainable);
  CHECK(frozen_params == g.total_parameters() - expected_trainable);
}

TEST_CASE("masks must cover the parameter set exactly") {
  auto spec = build_event_net(4, NetScale::kDesk);
  Graph g(spec);
  TrainableMask mask = TrainableMask::all_trainable(g);
  mask.trainable.erase(mask.trainable.begin());
  CHECK_THROWS_AS(mask.flags_for(g), ValidationError);
  mask = TrainableMask::all_trainable(g);
  mask.trainable["made_up"] = true;
  CHECK_THROWS_AS(mask.flags_for(g), ValidationError);
}

TEST_CASE("last-layer transfer leaves frozen parameters bit-identical") {
  auto cfg = small_config(SynthStyle::kA, 8, 60, 120, 0.7);
  ModelSpec spec8 = build_event_net(8, NetScale::kDesk);
  auto ds8 = synth_dataset(cfg, spec8);
  TrainConfig tc;
  tc.epochs = 2;
  tc.seed = 61;
  auto teacher = train(spec8, ds8, tc).checkpoint;

  auto cfg5 = small_config(SynthStyle::kB, 5, 62, 100, 0.7);
  ModelSpec spec5 = build_event_net(5, NetScale::kDesk);
  auto ds5 = synth_dataset(cfg5, spec5);
  TrainConfig tc5;
  tc5.epochs = 2;
  tc5.seed = 63;
  auto result = transfer_last_layer(teacher, 5, ds5, tc5);

  Graph g(result.checkpoint.spec);
  const auto fw = static_cast<std::size_t>(g.final_dense_weight());
  auto student0 = make_student(teacher, 5, tc5.seed);
  bool head_moved = false;
  for (std::size_t i = 0; i < result.checkpoint.params.size(); ++i) {
    if (i == fw || i == fw + 1) {
      head_moved = head_moved ||
                   result.checkpoint.params[i].data != student0.params[i].data;
    } else {
      CHECK(result.checkpoint.params[i].data == teacher.params[i].data);
    }
  }
  CHECK(head_moved);
}

TEST_CASE("an ImageNet-shaped 1000 head shrinks to 30") {
  auto teacher = Checkpoint::fresh(build_activity_net(1000, false, 6, 16), 9);
  auto student = make_student(teacher, 30, 10);
  Graph g(student.spec);
  CHECK(g.params()[static_cast<std::size_t>(g.final_dense_weight())].shape[0] ==
        30);
}

TEST_CASE("domain adaptation trains on the concatenated shared classes") {
  auto cfg_a = small_config(SynthStyle::kA, 5, 70, 100, 0.7);
  auto cfg_b = small_config(SynthStyle::kB, 5, 71, 100, 0.7);
  ModelSpec spec = build_event_net(5, NetScale::kDesk);
  auto ds_a = synth_dataset(cfg_a, spec);
  auto ds_b = synth_dataset(cfg_b, spec);
  TrainConfig tc;
  tc.epochs = 1;
  tc.seed = 72;
  auto result = domain_adapt(spec, {ds_a, ds_b}, tc);
  CHECK(result.checkpoint.spec.output_size == 5);
  CHECK(result.curve.epochs.size() == 1);

  auto cfg8a = small_config(SynthStyle::kA, 8, 73, 60, 0.8);
  auto cfg8b = small_config(SynthStyle::kB, 8, 74, 60, 0.8);
  ModelSpec spec8 = build_event_net(8, NetScale::kDesk);
  auto r2 = domain_adapt(
      spec8, {synth_dataset(cfg8a, spec8), synth_dataset(cfg8b, spec8)}, tc);
  CHECK(r2.checkpoint.spec.output_size == 8);
}

TEST_CASE("domain adaptation rejects mismatched vocabularies by name") {
  auto cfg_a = small_config(SynthStyle::kA, 5, 80, 50, 0.8);
  auto cfg_b = small_config(SynthStyle::kB, 5, 81, 50, 0.8);
  cfg_b.events[2] = "somersault";
  ModelSpec spec = build_event_net(5, NetScale::kDesk);
  auto ds_a = synth_dataset(cfg_a, spec);
  auto ds_b = synth_dataset(cfg_b, spec);
  TrainConfig tc;
  CHECK_THROWS_WITH(domain_adapt(spec, {ds_a, ds_b}, tc),
                    Catch::Matchers::ContainsSubstring("somersault"));
}

TEST_CASE("epochs_to_threshold finds the first crossing") {
  TrainingCurve curve;
  for (double v : {0.5, 0.8, 0.95}) {
    EpochStats s;
    s.train_accuracy = v;
    s.holdout_accuracy = v;
    curve.epochs.push_back(s);
  }
  auto hit = epochs_to_threshold(curve, 0.9);
  REQUIRE(hit.has_value());
  CHECK(*hit == 2);
  CHECK(epochs_to_threshold(curve, 0.9, CurveMetric::kTrain) == hit);
}

TEST_CASE("epochs_to_threshold reports unreached thresholds as none") {
  TrainingCurve curve;
  for (double v : {0.9, 0.99}) {
    EpochStats s;
    s.train_accuracy = v;
    s.holdout_accuracy = v;
    curve.epochs.push_back(s);
  }
  CHECK_FALSE(epochs_to_threshold(curve, 1.0).has_value());
  CHECK_THROWS_AS(epochs_to_threshold(curve, 0.0), ValidationError);
  CHECK_THROWS_AS(epochs_to_threshold(curve, 1.5), ValidationError);
}

TEST_CASE("curves without holdout entries never cross on the holdout metric") {
  TrainingCurve curve;
  EpochStats s;
  s.train_accuracy = 1.0;
  curve.epochs.push_back(s);
  CHECK_FALSE(epochs_to_threshold(curve, 0.5).has_value());
  CHECK(epochs_to_threshold(curve, 0.5, CurveMetric::kTrain).has_value());
}

TEST_CASE("training curves round-trip through csv") {
  testutil::TempDir tmp;
  TrainingCurve curve;
  Rng rng(5);
  for (int i = 0; i < 7; ++i) {
    EpochStats s;
    s.train_accuracy = rng.uniform();
    s.train_loss = rng.uniform() * 3;
    if (i % 2 == 0) s.holdout_accuracy = rng.uniform();
    curve.epochs.push_back(s);
  }
  auto p = tmp.path() / "curve.csv";
  curve.save_csv(p);
  auto back = TrainingCurve::load_csv(p);
  REQUIRE(back.epochs.size() == curve.epochs.size());
  for (std::size_t i = 0; i < curve.epochs.size(); ++i) {
    CHECK(back.epochs[i].train_accuracy == curve.epochs[i].train_accuracy);
    CHECK(back.epochs[i].train_loss == curve.epochs[i].train_loss);
    CHECK(back.epochs[i].holdout_accuracy == curve.epochs[i].holdout_accuracy);
  }
}
