#pragma once

// Training: dataset preprocessing, the two loss heads, Adam, the epoch loop
// and the recorded training curve. Single-threaded on purpose; with a fixed
// seed a run is bit-reproducible.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pixlog/common.hpp"
#include "pixlog/ingest.hpp"
#include "pixlog/manifest.hpp"
#include "pixlog/metrics.hpp"
#include "pixlog/model.hpp"

namespace pixlog {

// Per-parameter trainable/frozen flags, keyed by parameter name. Must cover
// exactly the parameter set of the checkpoint it is applied to.
struct TrainableMask {
  std::map<std::string, bool> trainable;

  static TrainableMask all_trainable(const Graph& g) {
    TrainableMask m;
    for (const auto& p : g.params()) m.trainable[p.name] = true;
    return m;
  }

  std::vector<std::uint8_t> flags_for(const Graph& g) const {
    if (trainable.size() != g.params().size())
      throw ValidationError("trainable mask does not cover the parameter set");
    std::vector<std::uint8_t> out;
    out.reserve(g.params().size());
    for (const auto& p : g.params()) {
      auto it = trainable.find(p.name);
      if (it == trainable.end())
        throw ValidationError("trainable mask missing parameter '" + p.name +
                              "'");
      out.push_back(it->second ? 1 : 0);
    }
    return out;
  }
};

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t epochs = 1;
  std::int64_t batch_size = 32;
  std::uint64_t seed = 0;
  std::optional<TrainableMask> mask;

  void validate() const {
    if (!(lr > 0)) throw ValidationError("learning rate must be > 0");
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  }
};

struct EpochStats {
  double train_accuracy = 0.0;
  double train_loss = 0.0;
  std::optional<double> holdout_accuracy;
};

struct TrainingCurve {
  std::vector<EpochStats> epochs;

  void save_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open curve file for writing: " + path.string());
    out << "epoch,train_accuracy,train_loss,holdout_accuracy\n";
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      out << i << "," << format_double(epochs[i].train_accuracy) << ","
          << format_double(epochs[i].train_loss) << ",";
      if (epochs[i].holdout_accuracy)
        out << format_double(*epochs[i].holdout_accuracy);
      out << "\n";
    }
  }

  static TrainingCurve load_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open curve file: " + path.string());
    std::string line;
    if (!std::getline(in, line) ||
        line != "epoch,train_accuracy,train_loss,holdout_accuracy")
      throw FormatError("bad curve header in " + path.string());
    TrainingCurve curve;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto f = split(line, ',');
      if (f.size() != 4) throw FormatError("bad curve row '" + line + "'");
      EpochStats s;
      s.train_accuracy = parse_double(f[1], "curve accuracy");
      s.train_loss = parse_double(f[2], "curve loss");
      if (!f[3].empty()) s.holdout_accuracy = parse_double(f[3], "curve holdout");
      curve.epochs.push_back(s);
    }
    return curve;
  }
};

// ---------------------------------------------------------------------------
// Dataset preprocessing
// ---------------------------------------------------------------------------

// One frame as model input: channel promotion, deterministic resize, CHW
// float layout scaled to [0,1].
inline std::vector<float> preprocess_frame(const FrameImage& img,
                                           const ModelSpec& spec) {
  FrameImage prep = resize_image(
      to_channels(img, static_cast<int>(spec.input.channels)),
      static_cast<int>(spec.input.width), static_cast<int>(spec.input.height));
  std::vector<float> out(static_cast<std::size_t>(spec.input.channels *
                                                   spec.input.height *
                                                   spec.input.width));
  const int h = prep.height, w = prep.width, ch = prep.channels;
  for (int c = 0; c < ch; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out[(static_cast<std::size_t>(c) * h + y) * w + x] =
            static_cast<float>(prep.at(x, y, c)) / 255.0f;
  return out;
}

// Frames preprocessed and resident in memory, ready for batching.
struct DataSet {
  LabelMode mode = LabelMode::kEvent;
  std::int64_t n = 0;
  std::int64_t sample_numel = 0;
  std::int64_t streams = 1;
  std::vector<float> x0;
  std::vector<float> x1;                 // frame differences (two-stream)
  std::vector<EventVector> events;       // event mode
  std::vector<std::int64_t> classes;     // activity mode
  std::vector<std::string> label_names;
};

inline DataSet make_dataset(const DatasetManifest& manifest,
                            const ModelSpec& spec, const ImageSource& source) {
  manifest.validate();
  if (manifest.mode != spec.mode)
    throw ValidationError("manifest mode does not match model mode");
  if (static_cast<std::int64_t>(manifest.vocabulary.size()) !=
      spec.output_size)
    throw ValidationError("vocabulary size " +
                          std::to_string(manifest.vocabulary.size()) +
                          " does not match model output size " +
                          std::to_string(spec.output_size));
  DataSet ds;
  ds.mode = manifest.mode;
  ds.n = static_cast<std::int64_t>(manifest.entries.size());
  ds.sample_numel =
      spec.input.channels * spec.input.height * spec.input.width;
  ds.streams = spec.input.streams;
  ds.label_names = manifest.vocabulary.names();
  ds.x0.reserve(static_cast<std::size_t>(ds.n * ds.sample_numel));
  FrameImage prev_resized;
  std::int64_t prev_index = -2;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    FrameImage img = source(i, e);
    FrameImage resized = resize_image(
        to_channels(img, static_cast<int>(spec.input.channels)),
        static_cast<int>(spec.input.width),
        static_cast<int>(spec.input.height));
    auto x = preprocess_frame(resized, spec);
    ds.x0.insert(ds.x0.end(), x.begin(), x.end());
    if (ds.streams == 2) {
      // Motion stream: difference to the previous frame of the same clip;
      // a clip boundary (non-consecutive frame_index) differences against
      // itself, giving the flat mid-scale image.
      const FrameImage& prior =
          (e.frame_index == prev_index + 1 && prev_resized.width > 0)
              ? prev_resized
              : resized;
      auto d = preprocess_frame(frame_difference(resized, prior), spec);
      ds.x1.insert(ds.x1.end(), d.begin(), d.end());
    }
    prev_resized = std::move(resized);
    prev_index = e.frame_index;
    if (manifest.mode == LabelMode::kEvent)
      ds.events.push_back(e.events);
    else
      ds.classes.push_back(e.activity);
  }
  return ds;
}

inline DataSet make_dataset(const DatasetManifest& manifest,
                            const std::filesystem::path& manifest_dir,
                            const ModelSpec& spec) {
  return make_dataset(manifest, spec, file_image_source(manifest, manifest_dir));
}

template <typename T>
BatchT<T> gather_batch(const DataSet& ds, const std::vector<std::int64_t>& idx) {
  BatchT<T> b;
  b.n = static_cast<std::int64_t>(idx.size());
  b.x0 = TensorT<T>({b.n, ds.sample_numel});
  if (ds.streams == 2) b.x1 = TensorT<T>({b.n, ds.sample_numel});
  for (std::size_t s = 0; s < idx.size(); ++s) {
    const float* src = ds.x0.data() + idx[s] * ds.sample_numel;
    for (std::int64_t i = 0; i < ds.sample_numel; ++i)
      b.x0.data[s * ds.sample_numel + i] = static_cast<T>(src[i]);
    if (ds.streams == 2) {
      const float* src1 = ds.x1.data() + idx[s] * ds.sample_numel;
      for (std::int64_t i = 0; i < ds.sample_numel; ++i)
        b.x1.data[s * ds.sample_numel + i] = static_cast<T>(src1[i]);
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Loss heads
// ---------------------------------------------------------------------------

// Event head: independent per-event binary cross-entropy on the logits,
// summed over events, averaged over the batch. Activity head: categorical
// cross-entropy via log-softmax, averaged over the batch. Returns the mean
// loss and fills d(loss)/d(logits).
template <typename T>
double loss_and_dlogits(const ModelSpec& spec, const TensorT<T>& logits,
                        const DataSet& ds,
                        const std::vector<std::int64_t>& idx,
                        TensorT<T>& dlogits) {
  const std::int64_t e = spec.output_size;
  const std::int64_t n = static_cast<std::int64_t>(idx.size());
  dlogits = TensorT<T>({n, e});
  double total = 0.0;
  const T invn = T(1) / static_cast<T>(n);
  if (spec.mode == LabelMode::kEvent) {
    for (std::int64_t s = 0; s < n; ++s) {
      const EventVector& y = ds.events[static_cast<std::size_t>(idx[s])];
      for (std::int64_t j = 0; j < e; ++j) {
        const T z = logits.data[s * e + j];
        const T t = y.test(static_cast<std::size_t>(j)) ? T(1) : T(0);
        const T az = z >= T(0) ? z : -z;
        total += static_cast<double>(std::max(z, T(0)) - z * t +
                                     std::log1p(std::exp(-az)));
        const T sig = T(1) / (T(1) + std::exp(-z));
        dlogits.data[s * e + j] = (sig - t) * invn;
      }
    }
  } else {
    for (std::int64_t s = 0; s < n; ++s) {
      const std::int64_t truth = ds.classes[static_cast<std::size_t>(idx[s])];
      const T* z = logits.data.data() + s * e;
      T mx = z[0];
      for (std::int64_t j = 1; j < e; ++j) mx = std::max(mx, z[j]);
      T sum = T(0);
      for (std::int64_t j = 0; j < e; ++j) sum += std::exp(z[j] - mx);
      const T lse = mx + std::log(sum);
      total += static_cast<double>(lse - z[truth]);
      for (std::int64_t j = 0; j < e; ++j) {
        const T p = std::exp(z[j] - mx) / sum;
        dlogits.data[s * e + j] =
            (p - (j == truth ? T(1) : T(0))) * invn;
      }
    }
  }
  return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Accuracy helpers
// ---------------------------------------------------------------------------

// Mean accuracy of a checkpoint-shaped parameter set over a dataset:
// partial accuracy after 0.5 decoding in event mode, exact-match in
// activity mode.
inline double dataset_accuracy(const Network<float>& net,
                               const std::vector<Tensor>& params,
                               const DataSet& ds, std::int64_t batch_size) {
  if (ds.n == 0) throw ValidationError("empty dataset");
  Workspace<float> ws;
  double acc = 0.0;
  const std::int64_t e = net.spec().output_size;
  for (std::int64_t start = 0; start < ds.n; start += batch_size) {
    std::vector<std::int64_t> idx;
    for (std::int64_t i = start; i < std::min(ds.n, start + batch_size); ++i)
      idx.push_back(i);
    Batch b = gather_batch<float>(ds, idx);
    TensorT<float> logits = net.forward(params, b, ws);
    apply_output_activation(net.spec(), logits);
    for (std::size_t s = 0; s < idx.size(); ++s) {
      if (ds.mode == LabelMode::kEvent) {
        std::vector<double> scores(static_cast<std::size_t>(e));
        for (std::int64_t j = 0; j < e; ++j)
          scores[static_cast<std::size_t>(j)] =
              static_cast<double>(logits.data[s * e + j]);
        acc += partial_accuracy(decode_multi_hot(scores),
                                ds.events[static_cast<std::size_t>(idx[s])]);
      } else {
        std::int64_t best = 0;
        for (std::int64_t j = 1; j < e; ++j)
          if (logits.data[s * e + j] > logits.data[s * e + best]) best = j;
        acc += single_label_accuracy(
            best, ds.classes[static_cast<std::size_t>(idx[s])]);
      }
    }
  }
  return acc / static_cast<double>(ds.n);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainResult {
  Checkpoint checkpoint;
  TrainingCurve curve;
};

inline TrainResult train(const Checkpoint& start, const DataSet& ds,
                         const TrainConfig& config,
                         const DataSet* holdout = nullptr) {
  config.validate();
  start.validate();
  if (ds.n == 0) throw ValidationError("cannot train on an empty dataset");
  const ModelSpec& spec = start.spec;
  if (ds.mode != spec.mode)
    throw ValidationError("dataset mode does not match model mode");
  if (ds.sample_numel !=
      spec.input.channels * spec.input.height * spec.input.width)
    throw ValidationError("dataset sample shape does not match model input");
  if (spec.mode == LabelMode::kEvent &&
      !ds.events.empty() &&
      static_cast<std::int64_t>(ds.events.front().size()) != spec.output_size)
    throw ValidationError("label width does not match model output size");

  Network<float> net(spec);
  const Graph& g = net.graph();
  std::vector<Tensor> params = start.params;
  std::vector<std::uint8_t> trainable(g.params().size(), 1);
  if (config.mask) trainable = config.mask->flags_for(g);

  // Adam state
  std::vector<Tensor> m, v;
  m.reserve(params.size());
  v.reserve(params.size());
  for (const auto& p : params) {
    m.emplace_back(p.shape);
    v.emplace_back(p.shape);
  }
  std::int64_t step = 0;

  std::vector<Tensor> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.emplace_back(p.shape);

  Workspace<float> ws;
  Rng rng(config.seed);
  std::vector<std::int64_t> order(static_cast<std::size_t>(ds.n));
  for (std::int64_t i = 0; i < ds.n; ++i) order[static_cast<std::size_t>(i)] = i;

  TrainingCurve curve;
  const std::int64_t e = spec.output_size;
  for (std::int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    double acc_sum = 0.0;
    std::int64_t batches = 0;
    for (std::int64_t startidx = 0; startidx < ds.n;
         startidx += config.batch_size) {
      std::vector<std::int64_t> idx(
          order.begin() + startidx,
          order.begin() + std::min(ds.n, startidx + config.batch_size));
      Batch batch = gather_batch<float>(ds, idx);
      const TensorT<float>& logits = net.forward(params, batch, ws);

      // running train accuracy from the pre-update logits
      for (std::size_t s = 0; s < idx.size(); ++s) {
        if (spec.mode == LabelMode::kEvent) {
          std::vector<double> scores(static_cast<std::size_t>(e));
          for (std::int64_t j = 0; j < e; ++j) {
            const float z = logits.data[s * e + j];
            scores[static_cast<std::size_t>(j)] =
                1.0 / (1.0 + std::exp(-static_cast<double>(z)));
          }
          acc_sum +=
              partial_accuracy(decode_multi_hot(scores),
                               ds.events[static_cast<std::size_t>(idx[s])]);
        } else {
          std::int64_t best = 0;
          for (std::int64_t j = 1; j < e; ++j)
            if (logits.data[s * e + j] > logits.data[s * e + best]) best = j;
          acc_sum += single_label_accuracy(
              best, ds.classes[static_cast<std::size_t>(idx[s])]);
        }
      }

      TensorT<float> dlogits;
      const double loss = loss_and_dlogits(spec, logits, ds, idx, dlogits);
      if (!std::isfinite(loss))
        throw std::runtime_error(
            "non-finite training loss at epoch " + std::to_string(epoch) +
            ", batch " + std::to_string(batches) +
            "; try a smaller learning rate");
      loss_sum += loss;
      ++batches;

      for (auto& t : grads) t.fill(0.0f);
      net.backward(params, ws, dlogits, grads);

      ++step;
      const float b1t = 1.0f - std::pow(static_cast<float>(config.beta1),
                                        static_cast<float>(step));
      const float b2t = 1.0f - std::pow(static_cast<float>(config.beta2),
                                        static_cast<float>(step));
      for (std::size_t p = 0; p < params.size(); ++p) {
        if (!trainable[p]) continue;
        float* w = params[p].data.data();
        float* mp = m[p].data.data();
        float* vp = v[p].data.data();
        const float* gp = grads[p].data.data();
        const float b1 = static_cast<float>(config.beta1);
        const float b2 = static_cast<float>(config.beta2);
        const float lr = static_cast<float>(config.lr);
        const float eps = static_cast<float>(config.epsilon);
        for (std::size_t i = 0; i < params[p].data.size(); ++i) {
          mp[i] = b1 * mp[i] + (1.0f - b1) * gp[i];
          vp[i] = b2 * vp[i] + (1.0f - b2) * gp[i] * gp[i];
          const float mhat = mp[i] / b1t;
          const float vhat = vp[i] / b2t;
          w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
      }
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(batches);
    stats.train_accuracy = acc_sum / static_cast<double>(ds.n);
    if (holdout && holdout->n > 0)
      stats.holdout_accuracy =
          dataset_accuracy(net, params, *holdout, config.batch_size);
    curve.epochs.push_back(stats);
  }

  TrainResult result;
  result.checkpoint.spec = spec;
  result.checkpoint.params = std::move(params);
  result.checkpoint.seed = config.seed;
  result.checkpoint.epochs = start.epochs + config.epochs;
  result.checkpoint.labels =
      ds.label_names.empty() ? start.labels : ds.label_names;
  result.curve = std::move(curve);
  return result;
}

// Fresh-model convenience: initialize from the config seed, then train.
inline TrainResult train(const ModelSpec& spec, const DataSet& ds,
                         const TrainConfig& config,
                         const DataSet* holdout = nullptr) {
  return train(Checkpoint::fresh(spec, config.seed), ds, config, holdout);
}

}  // namespace pixlog
