// pixlog: command-line front end for the gameplay-video-to-event-log
// toolkit. One subcommand per pipeline stage; every run writes a
// runrecord.json beside its outputs with enough resolved state to re-execute
// the run exactly.
//
// Exit codes: 0 success, 2 usage error, 3 validation error, 4 runtime error.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pixlog/pixlog.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pixlog;

namespace {

std::uint64_t hash_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot hash missing input: " + p.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return fnv1a64(bytes);
}

std::uint64_t hash_dir_listing(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw IoError("cannot hash missing directory: " + dir.string());
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file())
      names.push_back(e.path().filename().string() + ":" +
                      std::to_string(e.file_size()));
  std::sort(names.begin(), names.end());
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& n : names) h = fnv1a64(n.data(), n.size(), h);
  return h;
}

std::vector<fs::path> list_frame_files(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw ValidationError("frames directory does not exist: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    if (ext == ".ppm" || ext == ".pgm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw ValidationError("no .ppm/.pgm frames in " + dir.string());
  return files;
}

// Collects the resolved state of one run and writes runrecord.json.
class RunRecord {
 public:
  RunRecord(std::string command, fs::path out_dir)
      : command_(std::move(command)),
        out_dir_(std::move(out_dir)),
        start_(std::chrono::steady_clock::now()) {
    arg("--out", out_dir_.string());
  }

  void arg(const std::string& flag, const std::string& value) {
    rerun_.push_back(flag);
    rerun_.push_back(value);
  }
  void flag(const std::string& f) { rerun_.push_back(f); }

  void input(const fs::path& p, bool directory = false) {
    inputs_[p.string()] = directory ? hash_dir_listing(p) : hash_file(p);
  }
  void output(const std::string& rel) { outputs_.push_back(rel); }

  void seed(std::uint64_t s) { seed_ = s; }

  void write() const {
    json j;
    j["command"] = command_;
    json argv = json::array();
    argv.push_back(command_);
    for (const auto& a : rerun_) argv.push_back(a);
    j["argv"] = argv;
    j["seed"] = seed_;
    json in = json::object();
    for (const auto& [p, h] : inputs_) in[p] = std::to_string(h);
    j["inputs"] = in;
    j["outputs"] = outputs_;
    j["duration_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - start_)
            .count();
    std::ofstream out(out_dir_ / "runrecord.json", std::ios::binary);
    if (!out) throw IoError("cannot write run record in " + out_dir_.string());
    out << j.dump(2) << "\n";
  }

 private:
  std::string command_;
  fs::path out_dir_;
  std::vector<std::string> rerun_;
  std::map<std::string, std::uint64_t> inputs_;
  std::vector<std::string> outputs_;
  std::uint64_t seed_ = 0;
  std::chrono::steady_clock::time_point start_;
};

fs::path resolve_out(const std::string& flag_value, const char* command) {
  fs::path out;
  if (!flag_value.empty()) {
    out = flag_value;
  } else {
    const char* root = std::getenv("PIXLOG_OUT_ROOT");
    out = root ? fs::path(root) / command : fs::path("pixlog-out") / command;
  }
  fs::create_directories(out);
  return out;
}

// Shared split options: contiguous k-fold or holdout selection applied to a
// manifest before training/evaluation.
struct SplitFlags {
  std::int64_t kfold = 0;
  std::int64_t fold = 0;
  double holdout = 0.0;
  std::uint64_t split_seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--kfold", kfold,
                    "contiguous k-fold count (use with --fold)");
    cmd->add_option("--fold", fold, "fold index, 0-based");
    cmd->add_option("--holdout", holdout,
                    "train fraction for a holdout split, in (0,1)");
    cmd->add_option("--split-seed", split_seed,
                    "seed for clip-level holdout shuffling");
  }

  void record(RunRecord& rec) const {
    if (kfold > 0) {
      rec.arg("--kfold", std::to_string(kfold));
      rec.arg("--fold", std::to_string(fold));
    }
    if (holdout > 0) {
      rec.arg("--holdout", format_double(holdout));
      rec.arg("--split-seed", std::to_string(split_seed));
    }
  }

  bool active() const { return kfold > 0 || holdout > 0; }

  // (train side, test side)
  std::pair<DatasetManifest, DatasetManifest> apply(
      const DatasetManifest& m) const {
    if (kfold > 0 && holdout > 0)
      throw ValidationError("--kfold and --holdout are mutually exclusive");
    if (kfold > 0) {
      auto folds = kfold_split(m, kfold);
      if (fold < 0 || fold >= static_cast<std::int64_t>(folds.size()))
        throw ValidationError("--fold outside 0.." +
                              std::to_string(folds.size() - 1));
      return folds[static_cast<std::size_t>(fold)];
    }
    if (holdout > 0) return holdout_split(m, holdout, split_seed);
    return {m, m};
  }
};

ModelSpec spec_from_flags(const std::string& arch, const std::string& scale,
                          std::int64_t e, std::int64_t input_size,
                          std::int64_t depth, bool two_stream) {
  if (arch == "event") {
    if (two_stream)
      throw ValidationError("--two-stream applies to the activity net only");
    return build_event_net(
        e, scale == "paper" ? NetScale::kPaper : NetScale::kDesk, input_size);
  }
  if (arch == "activity")
    return build_activity_net(e, two_stream, depth,
                              input_size == 0 ? 32 : input_size);
  throw ValidationError("unknown --arch '" + arch + "'");
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out, style = "A", events;
  std::vector<double> rates;
  std::int64_t width = 32, height = 32, frames = 3500, cap = 3;
  double fps = 12.0, empty = 0.88;
  std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& a) {
  SynthConfig cfg;
  cfg.style = synth_style_from_string(a.style);
  cfg.width = static_cast<int>(a.width);
  cfg.height = static_cast<int>(a.height);
  cfg.fps = a.fps;
  cfg.duration_s = static_cast<double>(a.frames) / a.fps;
  cfg.max_cooccurring = a.cap;
  cfg.empty_fraction = a.empty;
  cfg.seed = a.seed;
  if (a.events.empty()) {
    cfg.events = default_synth_config(cfg.style, a.seed).events;
  } else {
    for (auto part : split(a.events, ',')) cfg.events.emplace_back(part);
  }
  cfg.rates = a.rates.empty() ? std::vector<double>(cfg.events.size(), 1.0)
                              : a.rates;

  const fs::path out = resolve_out(a.out, "synth");
  RunRecord rec("synth", out);
  rec.seed(a.seed);
  rec.arg("--style", a.style);
  rec.arg("--width", std::to_string(a.width));
  rec.arg("--height", std::to_string(a.height));
  rec.arg("--fps", format_double(a.fps));
  rec.arg("--frames", std::to_string(a.frames));
  {
    std::string ev;
    for (std::size_t i = 0; i < cfg.events.size(); ++i)
      ev += (i ? "," : "") + cfg.events[i];
    rec.arg("--events", ev);
  }
  rec.arg("--cap", std::to_string(a.cap));
  rec.arg("--empty", format_double(a.empty));
  rec.arg("--seed", std::to_string(a.seed));

  auto result = generate(cfg);
  write_synth_dataset(result, out);
  rec.output("manifest.txt");
  rec.output("truth.log");
  rec.output("frames/");
  rec.write();
  std::cout << "wrote " << result.frames.size()
            << " frames, manifest and truth log under " << out.string()
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string out, frames_dir, log_file, vocab;
  double source_fps = 0, target_fps = 12;
};

int run_ingest(const IngestArgs& a) {
  std::vector<std::string> names;
  for (auto part : split(a.vocab, ',')) names.emplace_back(part);
  EventVocabulary vocab(names);

  const fs::path out = resolve_out(a.out, "ingest");
  RunRecord rec("ingest", out);
  rec.arg("--frames", a.frames_dir);
  rec.arg("--log", a.log_file);
  rec.arg("--vocab", a.vocab);
  rec.arg("--source-fps", format_double(a.source_fps));
  rec.arg("--target-fps", format_double(a.target_fps));
  rec.input(a.frames_dir, true);
  rec.input(a.log_file);

  auto files = list_frame_files(a.frames_dir);
  const double source = a.source_fps > 0 ? a.source_fps : a.target_fps;
  auto indices = extraction_indices(files.size(), source, a.target_fps);
  fs::create_directories(out / "frames");
  std::vector<std::string> rel_paths;
  for (std::size_t j = 0; j < indices.size(); ++j) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frames/%06zu%s", j,
                  files[indices[j]].extension().string().c_str());
    fs::copy_file(files[indices[j]], out / buf,
                  fs::copy_options::overwrite_existing);
    rel_paths.emplace_back(buf);
  }
  auto log_entries = parse_raw_log(a.log_file);
  auto manifest = pair_labels(rel_paths, a.target_fps, vocab, log_entries);
  save_manifest(manifest, out / "manifest.txt");
  rec.output("manifest.txt");
  rec.output("frames/");
  rec.write();
  std::cout << "ingested " << rel_paths.size() << " frames, "
            << log_entries.size() << " log events (" << manifest.late_events
            << " past the last frame)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string out, manifest, arch = "event", scale = "desk", start;
  std::int64_t input_size = 0, depth = 10, epochs = 10, batch = 32;
  bool two_stream = false;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  SplitFlags splits;
};

int run_train(const TrainArgs& a) {
  const fs::path out = resolve_out(a.out, "train");
  RunRecord rec("train", out);
  rec.seed(a.seed);
  rec.arg("--manifest", a.manifest);
  rec.arg("--arch", a.arch);
  rec.arg("--scale", a.scale);
  if (a.input_size) rec.arg("--input-size", std::to_string(a.input_size));
  if (a.arch == "activity") rec.arg("--depth", std::to_string(a.depth));
  if (a.two_stream) rec.flag("--two-stream");
  if (!a.start.empty()) rec.arg("--start", a.start);
  rec.arg("--epochs", std::to_string(a.epochs));
  rec.arg("--batch", std::to_string(a.batch));
  rec.arg("--lr", format_double(a.lr));
  rec.arg("--seed", std::to_string(a.seed));
  a.splits.record(rec);
  rec.input(a.manifest);

  auto manifest = load_manifest(a.manifest);
  const fs::path manifest_dir = fs::path(a.manifest).parent_path();
  auto [train_m, holdout_m] = a.splits.apply(manifest);

  Checkpoint start_ckpt;
  if (!a.start.empty()) {
    rec.input(a.start);
    start_ckpt = load_checkpoint(a.start);
  } else {
    auto spec = spec_from_flags(
        a.arch, a.scale, static_cast<std::int64_t>(manifest.vocabulary.size()),
        a.input_size, a.depth, a.two_stream);
    start_ckpt = Checkpoint::fresh(spec, a.seed);
  }

  auto ds = make_dataset(train_m, manifest_dir, start_ckpt.spec);
  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch;
  tc.lr = a.lr;
  tc.seed = a.seed;
  DataSet holdout_ds;
  const bool with_holdout = a.splits.active();
  if (with_holdout)
    holdout_ds = make_dataset(holdout_m, manifest_dir, start_ckpt.spec);
  auto result = train(start_ckpt, ds, tc, with_holdout ? &holdout_ds : nullptr);
  save_checkpoint(result.checkpoint, out / "checkpoint.pxlg");
  result.curve.save_csv(out / "curve.csv");
  rec.output("checkpoint.pxlg");
  rec.output("curve.csv");
  rec.write();
  std::cout << "trained " << a.epochs << " epochs; final train accuracy "
            << format_double(result.curve.epochs.back().train_accuracy)
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// transfer
// ---------------------------------------------------------------------------

struct TransferArgs {
  std::string out, teacher, manifest, mode = "student-teacher";
  std::vector<std::string> extra_manifests;
  std::int64_t epochs = 10, batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  SplitFlags splits;
};

int run_transfer(const TransferArgs& a) {
  const fs::path out = resolve_out(a.out, "transfer");
  RunRecord rec("transfer", out);
  rec.seed(a.seed);
  rec.arg("--teacher", a.teacher);
  rec.arg("--manifest", a.manifest);
  rec.arg("--mode", a.mode);
  for (const auto& m : a.extra_manifests) rec.arg("--extra-manifest", m);
  rec.arg("--epochs", std::to_string(a.epochs));
  rec.arg("--batch", std::to_string(a.batch));
  rec.arg("--lr", format_double(a.lr));
  rec.arg("--seed", std::to_string(a.seed));
  a.splits.record(rec);
  rec.input(a.teacher);
  rec.input(a.manifest);

  auto teacher = load_checkpoint(a.teacher);
  auto manifest = load_manifest(a.manifest);
  const fs::path manifest_dir = fs::path(a.manifest).parent_path();
  auto [train_m, holdout_m] = a.splits.apply(manifest);
  const auto target_e = static_cast<std::int64_t>(manifest.vocabulary.size());

  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch;
  tc.lr = a.lr;
  tc.seed = a.seed;

  Checkpoint student0 = make_student(teacher, target_e, a.seed);
  auto ds = make_dataset(train_m, manifest_dir, student0.spec);
  DataSet holdout_ds;
  const bool with_holdout = a.splits.active();
  if (with_holdout)
    holdout_ds = make_dataset(holdout_m, manifest_dir, student0.spec);
  const DataSet* ho = with_holdout ? &holdout_ds : nullptr;

  TrainResult result;
  if (a.mode == "student-teacher") {
    result = train(student0, ds, tc, ho);
  } else if (a.mode == "last-layer") {
    result = transfer_last_layer(teacher, target_e, ds, tc, ho);
  } else if (a.mode == "domain-adapt") {
    std::vector<DataSet> parts = {ds};
    for (const auto& extra : a.extra_manifests) {
      rec.input(extra);
      auto em = load_manifest(extra);
      parts.push_back(
          make_dataset(em, fs::path(extra).parent_path(), student0.spec));
    }
    result = domain_adapt(student0.spec, parts, tc, ho);
  } else {
    throw ValidationError(
        "unknown --mode '" + a.mode +
        "' (expected student-teacher, last-layer or domain-adapt)");
  }
  save_checkpoint(result.checkpoint, out / "student.pxlg");
  result.curve.save_csv(out / "curve.csv");
  rec.output("student.pxlg");
  rec.output("curve.csv");
  rec.write();
  std::cout << "transfer mode " << a.mode << " finished; final train accuracy "
            << format_double(result.curve.epochs.back().train_accuracy)
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string out, checkpoint, baseline, manifest;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  std::int64_t input_size = 32, forest_trees = 10, forest_depth = 100;
  SplitFlags splits;
};

int run_eval(const EvalArgs& a) {
  if (a.checkpoint.empty() == a.baseline.empty())
    throw ValidationError("give exactly one of --checkpoint or --baseline");
  const fs::path out = resolve_out(a.out, "eval");
  RunRecord rec("eval", out);
  rec.seed(a.seed);
  if (!a.checkpoint.empty()) {
    rec.arg("--checkpoint", a.checkpoint);
    rec.input(a.checkpoint);
  }
  if (!a.baseline.empty()) rec.arg("--baseline", a.baseline);
  rec.arg("--manifest", a.manifest);
  rec.arg("--threshold", format_double(a.threshold));
  rec.arg("--seed", std::to_string(a.seed));
  rec.arg("--input-size", std::to_string(a.input_size));
  if (a.baseline == "forest") {
    rec.arg("--forest-trees", std::to_string(a.forest_trees));
    rec.arg("--forest-depth", std::to_string(a.forest_depth));
  }
  a.splits.record(rec);
  rec.input(a.manifest);

  auto manifest = load_manifest(a.manifest);
  const fs::path manifest_dir = fs::path(a.manifest).parent_path();
  DecodeConfig decode;
  decode.threshold = a.threshold;

  // evaluation slices: every fold's test side, or the single holdout test
  std::vector<std::pair<DatasetManifest, DatasetManifest>> slices;
  std::vector<std::string> names;
  if (a.splits.kfold > 0) {
    auto folds = kfold_split(manifest, a.splits.kfold);
    for (std::size_t f = 0; f < folds.size(); ++f) {
      slices.push_back(std::move(folds[f]));
      names.push_back("fold" + std::to_string(f));
    }
  } else if (a.splits.holdout > 0) {
    slices.push_back(
        holdout_split(manifest, a.splits.holdout, a.splits.split_seed));
    names.push_back("holdout");
  } else {
    slices.push_back({manifest, manifest});
    names.push_back("all");
  }

  Rng rng(a.seed);
  std::vector<EvalReport> parts;
  for (std::size_t s = 0; s < slices.size(); ++s) {
    const auto& [train_m, test_m] = slices[s];
    if (!a.checkpoint.empty()) {
      auto ckpt = load_checkpoint(a.checkpoint);
      parts.push_back(evaluate_checkpoint(
          ckpt, test_m, file_image_source(test_m, manifest_dir), decode));
    } else if (a.baseline == "no-event") {
      const auto e = manifest.vocabulary.size();
      Predictor none = [e](std::size_t, const LabeledFrame&,
                           const FrameImage&) {
        FramePrediction p;
        p.events = no_event_baseline(e);
        return p;
      };
      parts.push_back(
          evaluate(none, test_m, file_image_source(test_m, manifest_dir)));
    } else if (a.baseline == "random") {
      const auto e = manifest.vocabulary.size();
      const auto cap = manifest.max_cooccurrence();
      if (manifest.mode == LabelMode::kEvent) {
        Predictor random = [e, cap, &rng](std::size_t, const LabeledFrame&,
                                          const FrameImage&) {
          FramePrediction p;
          p.events = random_baseline(e, cap, rng);
          return p;
        };
        parts.push_back(
            evaluate(random, test_m, file_image_source(test_m, manifest_dir)));
      } else {
        Predictor random = [e, &rng](std::size_t, const LabeledFrame&,
                                     const FrameImage&) {
          FramePrediction p;
          p.activity = static_cast<std::int64_t>(
              rng.below(static_cast<std::uint64_t>(e)));
          return p;
        };
        parts.push_back(
            evaluate(random, test_m, file_image_source(test_m, manifest_dir)));
      }
    } else if (a.baseline == "forest") {
      if (!a.splits.active())
        throw ValidationError(
            "the forest baseline needs --kfold or --holdout to define its "
            "training side");
      ModelSpec probe = build_event_net(
          static_cast<std::int64_t>(manifest.vocabulary.size()),
          NetScale::kDesk, a.input_size);
      auto train_ds = make_dataset(train_m, manifest_dir, probe);
      ForestConfig fc;
      fc.tree_count = a.forest_trees;
      fc.max_depth = a.forest_depth;
      fc.seed = a.seed;
      auto forest = train_forest(train_ds, fc);
      forest.input_h = probe.input.height;
      forest.input_w = probe.input.width;
      forest.input_c = probe.input.channels;
      save_forest(forest, out / ("forest_" + names[s] + ".txt"));
      rec.output("forest_" + names[s] + ".txt");
      auto test_ds = make_dataset(test_m, manifest_dir, probe);
      std::vector<double> values;
      for (std::int64_t i = 0; i < test_ds.n; ++i) {
        std::vector<float> x(
            test_ds.x0.begin() + i * test_ds.sample_numel,
            test_ds.x0.begin() + (i + 1) * test_ds.sample_numel);
        values.push_back(
            partial_accuracy(predict_forest_features(forest, x),
                             test_ds.events[static_cast<std::size_t>(i)]));
      }
      parts.push_back(report_from_values("partial_accuracy", values));
    } else {
      throw ValidationError("unknown --baseline '" + a.baseline +
                            "' (expected no-event, random or forest)");
    }
  }
  auto report = merge_reports(parts, names);
  report.save_json(out / "report.json");
  report.save_text(out / "report.txt");
  rec.output("report.json");
  rec.output("report.txt");
  rec.write();
  std::cout << "mean " << format_double(report.mean) << " std "
            << format_double(report.stddev) << " over "
            << report.per_frame.size() << " frames\n";
  return 0;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string out, checkpoint, frames_dir, vocab;
  double fps = 12.0, threshold = 0.5;
};

int run_predict(const PredictArgs& a) {
  const fs::path out = resolve_out(a.out, "predict");
  RunRecord rec("predict", out);
  rec.arg("--checkpoint", a.checkpoint);
  rec.arg("--frames", a.frames_dir);
  rec.arg("--fps", format_double(a.fps));
  rec.arg("--threshold", format_double(a.threshold));
  if (!a.vocab.empty()) rec.arg("--vocab", a.vocab);
  rec.input(a.checkpoint);
  rec.input(a.frames_dir, true);

  auto ckpt = load_checkpoint(a.checkpoint);
  std::vector<std::string> names;
  if (!a.vocab.empty()) {
    for (auto part : split(a.vocab, ',')) names.emplace_back(part);
  } else {
    names = ckpt.labels;
  }
  if (names.empty())
    throw ValidationError(
        "checkpoint carries no label names; pass --vocab to name the events");
  if (static_cast<std::int64_t>(names.size()) != ckpt.spec.output_size)
    throw ValidationError(
        "vocabulary size " + std::to_string(names.size()) +
        " does not match the checkpoint's output size " +
        std::to_string(ckpt.spec.output_size));
  if (!a.vocab.empty() && !ckpt.labels.empty() && names != ckpt.labels)
    throw ValidationError(
        "--vocab disagrees with the vocabulary stored in the checkpoint");
  EventVocabulary vocab(names);

  auto files = list_frame_files(a.frames_dir);
  DecodeConfig decode;
  decode.threshold = a.threshold;
  decode.validate();

  Network<float> net(ckpt.spec);
  Workspace<float> ws;
  std::vector<EventVector> predictions;
  FrameImage prev;
  const std::int64_t numel = ckpt.spec.input.channels *
                             ckpt.spec.input.height * ckpt.spec.input.width;
  const std::int64_t e = ckpt.spec.output_size;
  for (std::size_t i = 0; i < files.size(); ++i) {
    FrameImage img = load_image(files[i]);
    Batch b;
    b.n = 1;
    b.x0 = Tensor({1, numel});
    auto x = preprocess_frame(img, ckpt.spec);
    std::copy(x.begin(), x.end(), b.x0.data.begin());
    if (ckpt.spec.input.streams == 2) {
      const FrameImage& prior = i == 0 ? img : prev;
      b.x1 = Tensor({1, numel});
      auto d = preprocess_frame(frame_difference(img, prior), ckpt.spec);
      std::copy(d.begin(), d.end(), b.x1.data.begin());
    }
    prev = std::move(img);
    TensorT<float> logits = net.forward(ckpt.params, b, ws);
    apply_output_activation(ckpt.spec, logits);
    if (ckpt.spec.mode == LabelMode::kEvent) {
      std::vector<double> scores(static_cast<std::size_t>(e));
      for (std::int64_t j = 0; j < e; ++j)
        scores[static_cast<std::size_t>(j)] =
            static_cast<double>(logits.data[j]);
      predictions.push_back(decode_multi_hot(scores, decode));
    } else {
      std::int64_t best = 0;
      for (std::int64_t j = 1; j < e; ++j)
        if (logits.data[j] > logits.data[best]) best = j;
      EventVector one_hot(static_cast<std::size_t>(e));
      one_hot.set(static_cast<std::size_t>(best));
      predictions.push_back(std::move(one_hot));
    }
  }
  auto log = emit_log(predictions, a.fps, vocab);
  save_log(log, out / "predicted.log");
  rec.output("predicted.log");
  rec.write();
  std::cout << "predicted " << predictions.size() << " frames into "
            << (out / "predicted.log").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string out;
  std::vector<std::string> inputs;
  std::vector<std::string> names;
  double threshold = 0.9;
};

int run_report(const ReportArgs& a) {
  if (a.inputs.empty())
    throw ValidationError(
        "report needs at least one report.json or curve.csv input");
  const fs::path out = resolve_out(a.out, "report");
  RunRecord rec("report", out);
  for (const auto& in : a.inputs) rec.arg("--input", in);
  for (const auto& n : a.names) rec.arg("--name", n);
  rec.arg("--threshold", format_double(a.threshold));

  struct Row {
    std::string name;
    std::string kind;
    double mean = 0, stddev = 0;
    std::int64_t count = 0;
    std::string epochs_to_threshold = "-";
    std::string final_holdout = "-";
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    const fs::path p = a.inputs[i];
    rec.input(p);
    Row row;
    row.name = i < a.names.size() ? a.names[i] : p.stem().string();
    if (p.extension() == ".json") {
      std::ifstream in(p);
      if (!in) throw IoError("cannot open report: " + p.string());
      json j = json::parse(in, nullptr, true);
      row.kind = j.value("metric", "unknown");
      row.mean = j.value("mean", 0.0);
      row.stddev = j.value("std", 0.0);
      row.count = j.value("count", 0);
    } else if (p.extension() == ".csv") {
      auto curve = TrainingCurve::load_csv(p);
      row.kind = "training_curve";
      row.mean = curve.epochs.back().train_accuracy;
      row.count = static_cast<std::int64_t>(curve.epochs.size());
      auto crossing = epochs_to_threshold(curve, a.threshold);
      if (!crossing)
        crossing =
            epochs_to_threshold(curve, a.threshold, CurveMetric::kTrain);
      if (crossing) row.epochs_to_threshold = std::to_string(*crossing);
      for (auto it = curve.epochs.rbegin(); it != curve.epochs.rend(); ++it)
        if (it->holdout_accuracy) {
          row.final_holdout = format_double(*it->holdout_accuracy);
          break;
        }
      // re-emit the curve in plot-ready form beside the table
      curve.save_csv(out / (row.name + ".curve.csv"));
      rec.output(row.name + ".curve.csv");
    } else {
      throw ValidationError("unsupported report input: " + p.string());
    }
    rows.push_back(std::move(row));
  }

  std::ofstream txt(out / "comparison.txt", std::ios::binary);
  std::ofstream csv(out / "comparison.csv", std::ios::binary);
  txt << "name kind mean std n epochs_to_" << format_double(a.threshold)
      << " final_holdout\n";
  csv << "name,kind,mean,std,n,epochs_to_threshold,final_holdout\n";
  for (const auto& r : rows) {
    txt << r.name << " " << r.kind << " " << format_double(r.mean) << " "
        << format_double(r.stddev) << " " << r.count << " "
        << r.epochs_to_threshold << " " << r.final_holdout << "\n";
    csv << r.name << "," << r.kind << "," << format_double(r.mean) << ","
        << format_double(r.stddev) << "," << r.count << ","
        << r.epochs_to_threshold << "," << r.final_holdout << "\n";
  }
  txt.close();
  csv.close();
  rec.output("comparison.txt");
  rec.output("comparison.csv");
  rec.write();
  std::cout << "compared " << rows.size() << " inputs into "
            << (out / "comparison.txt").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pixlog: learn game-event logs from gameplay video frames"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand(
      "synth", "generate a synthetic labeled gameplay dataset");
  synth_cmd->set_config("--config", "", "config file (flag=value lines)");
  synth_cmd->add_option("--out", synth_args.out, "output directory");
  synth_cmd->add_option("--style", synth_args.style, "sprite style (A or B)");
  synth_cmd->add_option("--width", synth_args.width, "frame width");
  synth_cmd->add_option("--height", synth_args.height, "frame height");
  synth_cmd->add_option("--fps", synth_args.fps, "frame rate");
  synth_cmd->add_option("--frames", synth_args.frames, "frame count");
  synth_cmd->add_option("--events", synth_args.events,
                        "comma-separated event names");
  synth_cmd->add_option("--rates", synth_args.rates,
                        "per-event occurrence weights");
  synth_cmd->add_option("--cap", synth_args.cap, "max co-occurring events");
  synth_cmd->add_option("--empty", synth_args.empty,
                        "target empty-frame fraction");
  synth_cmd->add_option("--seed", synth_args.seed, "generator seed");

  IngestArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand(
      "ingest", "pair extracted frames with a game-event log");
  ingest_cmd->set_config("--config", "", "config file (flag=value lines)");
  ingest_cmd->add_option("--out", ingest_args.out, "output directory");
  ingest_cmd->add_option("--frames", ingest_args.frames_dir, "frame directory")
      ->required();
  ingest_cmd
      ->add_option("--log", ingest_args.log_file,
                   "event log: '<timestamp> <event>' per line")
      ->required();
  ingest_cmd
      ->add_option("--vocab", ingest_args.vocab,
                   "ordered comma-separated event names")
      ->required();
  ingest_cmd->add_option("--source-fps", ingest_args.source_fps,
                         "frame rate of the input sequence");
  ingest_cmd->add_option("--target-fps", ingest_args.target_fps,
                         "frame rate after decimation");

  TrainArgs train_args;
  auto* train_cmd =
      app.add_subcommand("train", "train a classifier on a manifest");
  train_cmd->set_config("--config", "", "config file (flag=value lines)");
  train_cmd->add_option("--out", train_args.out, "output directory");
  train_cmd->add_option("--manifest", train_args.manifest, "dataset manifest")
      ->required();
  train_cmd->add_option("--arch", train_args.arch, "event or activity");
  train_cmd->add_option("--scale", train_args.scale, "desk or paper");
  train_cmd->add_option("--input-size", train_args.input_size,
                        "model input resolution (0 = architecture default)");
  train_cmd->add_option("--depth", train_args.depth,
                        "activity net depth (weighted layers)");
  train_cmd->add_flag("--two-stream", train_args.two_stream,
                      "feed pixel and frame-difference streams");
  train_cmd->add_option("--start", train_args.start,
                        "checkpoint to continue from");
  train_cmd->add_option("--epochs", train_args.epochs, "training epochs");
  train_cmd->add_option("--batch", train_args.batch, "batch size");
  train_cmd->add_option("--lr", train_args.lr, "Adam step size");
  train_cmd->add_option("--seed", train_args.seed, "train seed");
  train_args.splits.attach(train_cmd);

  TransferArgs transfer_args;
  auto* transfer_cmd = app.add_subcommand(
      "transfer", "adapt a trained checkpoint to a new vocabulary");
  transfer_cmd->set_config("--config", "", "config file (flag=value lines)");
  transfer_cmd->add_option("--out", transfer_args.out, "output directory");
  transfer_cmd
      ->add_option("--teacher", transfer_args.teacher, "teacher checkpoint")
      ->required();
  transfer_cmd
      ->add_option("--manifest", transfer_args.manifest,
                   "target-domain manifest")
      ->required();
  transfer_cmd->add_option("--mode", transfer_args.mode,
                           "student-teacher, last-layer or domain-adapt");
  transfer_cmd->add_option("--extra-manifest", transfer_args.extra_manifests,
                           "additional shared-class manifests (domain-adapt)");
  transfer_cmd->add_option("--epochs", transfer_args.epochs, "training epochs");
  transfer_cmd->add_option("--batch", transfer_args.batch, "batch size");
  transfer_cmd->add_option("--lr", transfer_args.lr, "Adam step size");
  transfer_cmd->add_option("--seed", transfer_args.seed, "train seed");
  transfer_args.splits.attach(transfer_cmd);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand(
      "eval", "evaluate a checkpoint or baseline against a manifest");
  eval_cmd->set_config("--config", "", "config file (flag=value lines)");
  eval_cmd->add_option("--out", eval_args.out, "output directory");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint,
                       "checkpoint to evaluate");
  eval_cmd->add_option("--baseline", eval_args.baseline,
                       "no-event, random or forest");
  eval_cmd->add_option("--manifest", eval_args.manifest, "dataset manifest")
      ->required();
  eval_cmd->add_option("--threshold", eval_args.threshold,
                       "multi-hot decode threshold");
  eval_cmd->add_option("--seed", eval_args.seed,
                       "seed for stochastic baselines");
  eval_cmd->add_option("--input-size", eval_args.input_size,
                       "feature resolution for the forest baseline");
  eval_cmd->add_option("--forest-trees", eval_args.forest_trees,
                       "forest tree count");
  eval_cmd->add_option("--forest-depth", eval_args.forest_depth,
                       "forest depth limit");
  eval_args.splits.attach(eval_cmd);

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand(
      "predict", "turn a directory of frames into a game log");
  predict_cmd->set_config("--config", "", "config file (flag=value lines)");
  predict_cmd->add_option("--out", predict_args.out, "output directory");
  predict_cmd
      ->add_option("--checkpoint", predict_args.checkpoint,
                   "trained checkpoint")
      ->required();
  predict_cmd
      ->add_option("--frames", predict_args.frames_dir,
                   "directory of .ppm/.pgm frames")
      ->required();
  predict_cmd->add_option("--fps", predict_args.fps,
                          "frame rate of the sequence");
  predict_cmd->add_option("--threshold", predict_args.threshold,
                          "multi-hot decode threshold");
  predict_cmd->add_option("--vocab", predict_args.vocab,
                          "event names (defaults to the checkpoint's)");

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand(
      "report", "tabulate evaluation reports and training curves");
  report_cmd->set_config("--config", "", "config file (flag=value lines)");
  report_cmd->add_option("--out", report_args.out, "output directory");
  report_cmd->add_option("--input", report_args.inputs,
                         "report.json or curve.csv files");
  report_cmd->add_option("--name", report_args.names,
                         "row names matching --input order");
  report_cmd->add_option("--threshold", report_args.threshold,
                         "accuracy threshold for epochs-to-threshold");

  try {
    app.parse(argc, argv);
    if (synth_cmd->parsed()) return run_synth(synth_args);
    if (ingest_cmd->parsed()) return run_ingest(ingest_args);
    if (train_cmd->parsed()) return run_train(train_args);
    if (transfer_cmd->parsed()) return run_transfer(transfer_args);
    if (eval_cmd->parsed()) return run_eval(eval_args);
    if (predict_cmd->parsed()) return run_predict(predict_args);
    if (report_cmd->parsed()) return run_report(report_args);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 4;
  }
}
