#pragma once

// Stock architectures: the 5-conv/3-fc event classifier and the
// residual-style activity classifier (optionally two-stream). Paper scale
// mirrors the published shapes; desk scale keeps the topology and shrinks
// filters and input so everything trains on a laptop CPU.

#include <string>
#include <vector>

#include "pixlog/model.hpp"

namespace pixlog {

enum class NetScale { kDesk, kPaper };

// Multi-label event classifier: five conv blocks, three fully connected
// layers, bounded-threshold outputs of width E.
inline ModelSpec build_event_net(std::int64_t e, NetScale scale,
                                 std::int64_t input_hw = 0,
                                 std::int64_t channels = 3) {
  if (e < 1) throw ValidationError("event count must be >= 1");
  ModelSpec spec;
  spec.mode = LabelMode::kEvent;
  spec.output_activation = OutputActivation::kSigmoid;
  spec.style = BlockStyle::kPlain;
  spec.output_size = e;
  if (scale == NetScale::kPaper) {
    if (input_hw == 0) input_hw = 227;
    spec.input = {input_hw, input_hw, channels, 1};
    spec.conv_blocks = {
        {96, 11, 4, 0, 3, 2}, {256, 5, 1, 2, 3, 2}, {384, 3, 1, 1, 0, 0},
        {384, 3, 1, 1, 0, 0}, {256, 3, 1, 1, 3, 2},
    };
    spec.fc_widths = {4096, 4096};
  } else {
    if (input_hw == 0) input_hw = 32;
    if (input_hw < 32 || input_hw > 64)
      throw ValidationError(
          "desk-scale event net supports inputs from 32x32 to 64x64");
    spec.input = {input_hw, input_hw, channels, 1};
    spec.conv_blocks = {
        {8, 3, 1, 1, 2, 2},  {16, 3, 1, 1, 2, 2}, {16, 3, 1, 1, 2, 2},
        {32, 3, 1, 1, 2, 2}, {32, 3, 1, 1, 2, 2},
    };
    spec.fc_widths = {64, 32};
  }
  spec.validate();
  return spec;
}

inline const std::vector<std::int64_t>& supported_activity_depths() {
  static const std::vector<std::int64_t> depths = {6, 10, 14};
  return depths;
}

// Single-label activity classifier in the residual family. Depth counts
// the weighted layers on the main path (stem + 2 per block + head). With
// two_stream the pixel and frame-difference trunks are separate and their
// pooled features are concatenated ahead of the classification head.
inline ModelSpec build_activity_net(std::int64_t classes, bool two_stream,
                                    std::int64_t depth = 10,
                                    std::int64_t input_hw = 32,
                                    std::int64_t channels = 3) {
  if (classes < 2) throw ValidationError("activity net needs >= 2 classes");
  bool ok = false;
  for (auto d : supported_activity_depths()) ok = ok || d == depth;
  if (!ok) {
    std::string msg = "unsupported depth " + std::to_string(depth) +
                      "; supported depths:";
    for (auto d : supported_activity_depths()) msg += " " + std::to_string(d);
    throw ValidationError(msg);
  }
  ModelSpec spec;
  spec.mode = LabelMode::kActivity;
  spec.output_activation = OutputActivation::kSoftmax;
  spec.style = BlockStyle::kResidual;
  spec.input = {input_hw, input_hw, channels, two_stream ? 2 : 1};
  spec.stem_filters = 16;
  const std::int64_t blocks = (depth - 2) / 2;
  const std::int64_t first = blocks / 2 > 0 ? blocks / 2 : blocks;
  if (blocks - first > 0)
    spec.stages = {{16, first, 1}, {32, blocks - first, 2}};
  else
    spec.stages = {{16, first, 1}};
  spec.output_size = classes;
  spec.validate();
  return spec;
}

}  // namespace pixlog
