#pragma once

// Evaluation protocol: contiguous k-fold cross-validation, holdout splits,
// predictor evaluation and the report container.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pixlog/common.hpp"
#include "pixlog/manifest.hpp"
#include "pixlog/metrics.hpp"
#include "pixlog/model.hpp"
#include "pixlog/train.hpp"

namespace pixlog {

struct SplitRow {
  std::string name;
  double mean = 0.0;
  double stddev = 0.0;
  std::int64_t count = 0;
};

struct EvalReport {
  std::string metric;
  std::vector<double> per_frame;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over per_frame
  std::vector<SplitRow> splits;

  void recompute() {
    mean = 0.0;
    stddev = 0.0;
    if (per_frame.empty()) return;
    for (double v : per_frame) mean += v;
    mean /= static_cast<double>(per_frame.size());
    if (per_frame.size() < 2) return;
    double ss = 0.0;
    for (double v : per_frame) ss += (v - mean) * (v - mean);
    stddev = std::sqrt(ss / static_cast<double>(per_frame.size() - 1));
  }

  void save_text(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open report for writing: " + path.string());
    out << "metric " << metric << "\n";
    out << "overall mean " << format_double(mean) << " std "
        << format_double(stddev) << " n " << per_frame.size() << "\n";
    for (const auto& s : splits)
      out << "split " << s.name << " mean " << format_double(s.mean)
          << " std " << format_double(s.stddev) << " n " << s.count << "\n";
  }

  void save_json(const std::filesystem::path& path,
                 bool include_per_frame = true) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open report for writing: " + path.string());
    out << "{\n  \"metric\": \"" << metric << "\",\n";
    out << "  \"mean\": " << format_double(mean) << ",\n";
    out << "  \"std\": " << format_double(stddev) << ",\n";
    out << "  \"count\": " << per_frame.size() << ",\n";
    out << "  \"splits\": [";
    for (std::size_t i = 0; i < splits.size(); ++i) {
      out << (i ? "," : "") << "\n    {\"name\": \"" << splits[i].name
          << "\", \"mean\": " << format_double(splits[i].mean)
          << ", \"std\": " << format_double(splits[i].stddev)
          << ", \"count\": " << splits[i].count << "}";
    }
    out << (splits.empty() ? "" : "\n  ") << "],\n";
    out << "  \"per_frame\": [";
    if (include_per_frame)
      for (std::size_t i = 0; i < per_frame.size(); ++i)
        out << (i ? "," : "") << format_double(per_frame[i]);
    out << "]\n}\n";
  }
};

inline EvalReport report_from_values(std::string metric,
                                     std::vector<double> values) {
  EvalReport r;
  r.metric = std::move(metric);
  r.per_frame = std::move(values);
  r.recompute();
  return r;
}

// Merge fold-level reports into one, keeping a per-split breakdown.
inline EvalReport merge_reports(const std::vector<EvalReport>& parts,
                                const std::vector<std::string>& names) {
  EvalReport out;
  if (parts.empty()) throw ValidationError("no reports to merge");
  out.metric = parts.front().metric;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& p = parts[i];
    if (p.metric != out.metric)
      throw ValidationError("cannot merge reports with different metrics");
    out.per_frame.insert(out.per_frame.end(), p.per_frame.begin(),
                         p.per_frame.end());
    SplitRow row;
    row.name = i < names.size() ? names[i] : "split" + std::to_string(i);
    row.mean = p.mean;
    row.stddev = p.stddev;
    row.count = static_cast<std::int64_t>(p.per_frame.size());
    out.splits.push_back(row);
  }
  out.recompute();
  return out;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

namespace eval_detail {

inline DatasetManifest subset(const DatasetManifest& m,
                              const std::vector<std::size_t>& idx) {
  DatasetManifest out;
  out.target_fps = m.target_fps;
  out.mode = m.mode;
  out.vocabulary = m.vocabulary;
  out.late_events = 0;
  for (auto i : idx) out.entries.push_back(m.entries[i]);
  return out;
}

}  // namespace eval_detail

// Contiguous temporal folds: fold i tests on chunk i and trains on the
// rest. Chunk sizes differ by at most one; chunks partition the dataset.
inline std::vector<std::pair<DatasetManifest, DatasetManifest>> kfold_split(
    const DatasetManifest& m, std::int64_t k) {
  if (k < 2) throw ValidationError("k must be >= 2");
  const auto n = static_cast<std::int64_t>(m.entries.size());
  if (k > n)
    throw ValidationError("k = " + std::to_string(k) +
                          " exceeds the frame count " + std::to_string(n));
  std::vector<std::pair<DatasetManifest, DatasetManifest>> out;
  for (std::int64_t f = 0; f < k; ++f) {
    const auto lo = static_cast<std::size_t>(f * n / k);
    const auto hi = static_cast<std::size_t>((f + 1) * n / k);
    std::vector<std::size_t> test_idx, train_idx;
    for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i)
      (i >= lo && i < hi ? test_idx : train_idx).push_back(i);
    out.emplace_back(eval_detail::subset(m, train_idx),
                     eval_detail::subset(m, test_idx));
  }
  return out;
}

// Event mode holds out a contiguous tail (adjacent frames are near
// duplicates, so a shuffled frame split would leak). Activity mode shuffles
// at clip granularity; a clip is a maximal run of consecutive frame indices
// with one label.
inline std::pair<DatasetManifest, DatasetManifest> holdout_split(
    const DatasetManifest& m, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ValidationError("train_fraction must lie in (0,1)");
  const auto n = static_cast<std::int64_t>(m.entries.size());
  if (n < 2) throw ValidationError("need at least two entries to split");

  std::vector<std::size_t> train_idx, test_idx;
  if (m.mode == LabelMode::kEvent) {
    const auto train_n = std::llround(static_cast<double>(n) * train_fraction);
    if (train_n < 1 || train_n >= n)
      throw ValidationError("split leaves an empty side");
    for (std::int64_t i = 0; i < n; ++i)
      (i < train_n ? train_idx : test_idx).push_back(
          static_cast<std::size_t>(i));
  } else {
    // clip boundaries
    std::vector<std::pair<std::size_t, std::size_t>> clips;  // [begin, end)
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= m.entries.size(); ++i) {
      const bool boundary =
          i == m.entries.size() ||
          m.entries[i].frame_index != m.entries[i - 1].frame_index + 1 ||
          m.entries[i].activity != m.entries[i - 1].activity;
      if (boundary) {
        clips.emplace_back(begin, i);
        begin = i;
      }
    }
    std::vector<std::size_t> order(clips.size());
    for (std::size_t i = 0; i < clips.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    const auto train_clips = std::llround(
        static_cast<double>(clips.size()) * train_fraction);
    if (train_clips < 1 ||
        train_clips >= static_cast<std::int64_t>(clips.size()))
      throw ValidationError("split leaves an empty side");
    std::vector<bool> in_train(clips.size(), false);
    for (std::int64_t i = 0; i < train_clips; ++i)
      in_train[order[static_cast<std::size_t>(i)]] = true;
    for (std::size_t c = 0; c < clips.size(); ++c)
      for (std::size_t i = clips[c].first; i < clips[c].second; ++i)
        (in_train[c] ? train_idx : test_idx).push_back(i);
  }
  return {eval_detail::subset(m, train_idx), eval_detail::subset(m, test_idx)};
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct FramePrediction {
  EventVector events;          // event mode
  std::int64_t activity = -1;  // activity mode
};

using Predictor = std::function<FramePrediction(
    std::size_t index, const LabeledFrame& entry, const FrameImage& image)>;

// Generic per-frame evaluation; per-frame accuracies stay in frame order.
inline EvalReport evaluate(const Predictor& predictor,
                           const DatasetManifest& manifest,
                           const ImageSource& source) {
  manifest.validate();
  if (manifest.entries.empty())
    throw ValidationError("cannot evaluate an empty manifest");
  std::vector<double> values;
  values.reserve(manifest.entries.size());
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& entry = manifest.entries[i];
    FrameImage img = source(i, entry);
    FramePrediction pred = predictor(i, entry, img);
    if (manifest.mode == LabelMode::kEvent) {
      if (pred.events.size() != manifest.vocabulary.size())
        throw ValidationError("predictor vocabulary size mismatch");
      values.push_back(partial_accuracy(pred.events, entry.events));
    } else {
      values.push_back(single_label_accuracy(pred.activity, entry.activity));
    }
  }
  return report_from_values(manifest.mode == LabelMode::kEvent
                                ? "partial_accuracy"
                                : "single_label_accuracy",
                            std::move(values));
}

// Batched fast path for checkpoints.
inline EvalReport evaluate_checkpoint(const Checkpoint& ckpt,
                                      const DatasetManifest& manifest,
                                      const ImageSource& source,
                                      const DecodeConfig& decode = {},
                                      std::int64_t batch_size = 32) {
  ckpt.validate();
  decode.validate();
  if (manifest.mode != ckpt.spec.mode)
    throw ValidationError("manifest mode does not match checkpoint mode");
  if (static_cast<std::int64_t>(manifest.vocabulary.size()) !=
      ckpt.spec.output_size)
    throw ValidationError("manifest vocabulary size does not match checkpoint");
  if (!ckpt.labels.empty() &&
      ckpt.labels != manifest.vocabulary.names())
    throw ValidationError(
        "checkpoint was trained on a different vocabulary than the manifest");
  DataSet ds = make_dataset(manifest, ckpt.spec, source);
  Network<float> net(ckpt.spec);
  Workspace<float> ws;
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(ds.n));
  const std::int64_t e = ckpt.spec.output_size;
  for (std::int64_t start = 0; start < ds.n; start += batch_size) {
    std::vector<std::int64_t> idx;
    for (std::int64_t i = start; i < std::min(ds.n, start + batch_size); ++i)
      idx.push_back(i);
    Batch b = gather_batch<float>(ds, idx);
    TensorT<float> out = net.forward(ckpt.params, b, ws);
    apply_output_activation(ckpt.spec, out);
    for (std::size_t s = 0; s < idx.size(); ++s) {
      if (ds.mode == LabelMode::kEvent) {
        std::vector<double> scores(static_cast<std::size_t>(e));
        for (std::int64_t j = 0; j < e; ++j)
          scores[static_cast<std::size_t>(j)] =
              static_cast<double>(out.data[s * e + j]);
        values.push_back(
            partial_accuracy(decode_multi_hot(scores, decode),
                             ds.events[static_cast<std::size_t>(idx[s])]));
      } else {
        std::int64_t best = 0;
        for (std::int64_t j = 1; j < e; ++j)
          if (out.data[s * e + j] > out.data[s * e + best]) best = j;
        values.push_back(single_label_accuracy(
            best, ds.classes[static_cast<std::size_t>(idx[s])]));
      }
    }
  }
  return report_from_values(manifest.mode == LabelMode::kEvent
                                ? "partial_accuracy"
                                : "single_label_accuracy",
                            std::move(values));
}

}  // namespace pixlog
