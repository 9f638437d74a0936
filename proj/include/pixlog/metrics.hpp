#pragma once

// Frame-level metrics and score decoding.

#include <cstdint>
#include <vector>

#include "pixlog/common.hpp"
#include "pixlog/events.hpp"

namespace pixlog {

struct DecodeConfig {
  double threshold = 0.5;

  void validate() const {
    if (!(threshold > 0.0 && threshold < 1.0))
      throw ValidationError("decode threshold must lie in (0,1)");
  }
};

// Multi-hot decoding: event i is active iff its score strictly exceeds the
// threshold. Scores exactly at the threshold stay inactive.
inline EventVector decode_multi_hot(const std::vector<double>& scores,
                                    const DecodeConfig& config = {}) {
  config.validate();
  EventVector v(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    v.set(i, scores[i] > config.threshold);
  return v;
}

// Partial credit for a partially correct event set: with P the predicted
// active set and T the true active set, returns 1 - |P xor T| / |P union T|.
// Both sets empty counts as a perfect frame.
inline double partial_accuracy(const EventVector& pred,
                               const EventVector& truth) {
  if (pred.size() != truth.size())
    throw ValidationError("partial_accuracy: length mismatch");
  std::size_t uni = 0, sym = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    bool p = pred.test(i), t = truth.test(i);
    if (p || t) ++uni;
    if (p != t) ++sym;
  }
  if (uni == 0) return 1.0;
  return 1.0 - static_cast<double>(sym) / static_cast<double>(uni);
}

inline double single_label_accuracy(std::int64_t pred, std::int64_t truth) {
  return pred == truth ? 1.0 : 0.0;
}

}  // namespace pixlog
