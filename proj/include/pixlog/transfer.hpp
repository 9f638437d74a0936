#pragma once

// Student-teacher transfer and the two comparison regimes: frozen-last-layer
// retraining and combined-domain training from scratch.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pixlog/checkpoint_io.hpp"
#include "pixlog/model.hpp"
#include "pixlog/train.hpp"

namespace pixlog {

// Student checkpoint from a trained teacher: every non-final parameter is
// copied bit-exactly, the final fully connected layer (found structurally,
// not by name) is replaced with a freshly initialized layer of the new
// width. The student is meant to be retrained in full.
inline Checkpoint make_student(const Checkpoint& teacher,
                               std::int64_t new_output_size,
                               std::uint64_t seed) {
  teacher.validate();
  if (new_output_size < 1)
    throw ValidationError("student output size must be >= 1");
  Graph tg(teacher.spec);
  const int fw = tg.final_dense_weight();
  if (fw < 0)
    throw ValidationError(
        "teacher has no recognizable final classification layer");

  ModelSpec student_spec = teacher.spec;
  student_spec.output_size = new_output_size;
  student_spec.validate();
  Graph sg(student_spec);
  if (sg.final_dense_weight() != fw ||
      sg.params().size() != tg.params().size())
    throw ValidationError("resizing the final layer changed the topology");

  Checkpoint student;
  student.spec = student_spec;
  student.seed = seed;
  student.epochs = 0;
  student.params = sg.init_params<float>(seed);
  for (std::size_t i = 0; i < student.params.size(); ++i) {
    if (static_cast<int>(i) == fw || static_cast<int>(i) == fw + 1)
      continue;  // replaced head keeps its fresh initialization
    student.params[i] = teacher.params[i];
  }
  student.validate();
  return student;
}

// Mask for the standard transfer baseline: only the final layer learns.
inline TrainableMask final_layer_only_mask(const Graph& g) {
  const int fw = g.final_dense_weight();
  TrainableMask mask;
  for (std::size_t i = 0; i < g.params().size(); ++i)
    mask.trainable[g.params()[i].name] =
        static_cast<int>(i) == fw || static_cast<int>(i) == fw + 1;
  return mask;
}

// Classic transfer: resize the head, then retrain just the final fully
// connected layer while holding all other weights constant.
inline TrainResult transfer_last_layer(const Checkpoint& pretrained,
                                       std::int64_t new_output_size,
                                       const DataSet& ds,
                                       const TrainConfig& config,
                                       const DataSet* holdout = nullptr) {
  Checkpoint student = make_student(pretrained, new_output_size, config.seed);
  TrainConfig frozen = config;
  frozen.mask = final_layer_only_mask(Graph(student.spec));
  return train(student, ds, frozen, holdout);
}

// Combined-domain training from scratch on the shared classes of several
// datasets. No freezing, no weight copying.
inline TrainResult domain_adapt(const ModelSpec& spec,
                                const std::vector<DataSet>& shared,
                                const TrainConfig& config,
                                const DataSet* holdout = nullptr) {
  if (shared.empty()) throw ValidationError("domain_adapt needs datasets");
  DataSet combined;
  combined.mode = shared.front().mode;
  combined.sample_numel = shared.front().sample_numel;
  combined.streams = shared.front().streams;
  combined.label_names = shared.front().label_names;
  for (const auto& ds : shared) {
    if (ds.label_names != combined.label_names) {
      std::string msg = "shared-class vocabulary mismatch:";
      for (const auto& n : combined.label_names) msg += " " + n;
      msg += " vs";
      for (const auto& n : ds.label_names) msg += " " + n;
      throw ValidationError(msg);
    }
    if (ds.mode != combined.mode || ds.sample_numel != combined.sample_numel ||
        ds.streams != combined.streams)
      throw ValidationError("datasets are not shape-compatible");
    combined.n += ds.n;
    combined.x0.insert(combined.x0.end(), ds.x0.begin(), ds.x0.end());
    combined.x1.insert(combined.x1.end(), ds.x1.begin(), ds.x1.end());
    combined.events.insert(combined.events.end(), ds.events.begin(),
                           ds.events.end());
    combined.classes.insert(combined.classes.end(), ds.classes.begin(),
                            ds.classes.end());
  }
  return train(spec, combined, config, holdout);
}

enum class CurveMetric { kHoldout, kTrain };

// First epoch (0-based) whose accuracy reaches the threshold; nullopt when
// the curve never gets there.
inline std::optional<std::size_t> epochs_to_threshold(
    const TrainingCurve& curve, double threshold,
    CurveMetric metric = CurveMetric::kHoldout) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw ValidationError("threshold must lie in (0,1]");
  for (std::size_t i = 0; i < curve.epochs.size(); ++i) {
    const auto& ep = curve.epochs[i];
    if (metric == CurveMetric::kTrain) {
      if (ep.train_accuracy >= threshold) return i;
    } else if (ep.holdout_accuracy && *ep.holdout_accuracy >= threshold) {
      return i;
    }
  }
  return std::nullopt;
}

}  // namespace pixlog
