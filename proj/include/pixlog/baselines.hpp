#pragma once

// The two trivial comparison predictors from the evaluation protocol.

#include <cstdint>
#include <vector>

#include "pixlog/common.hpp"
#include "pixlog/events.hpp"

namespace pixlog {

// Draws a count c uniformly from {0..max_cooccurring}, then a uniform
// random c-subset of the E event types.
inline EventVector random_baseline(std::size_t e, std::size_t max_cooccurring,
                                   Rng& rng) {
  if (max_cooccurring > e)
    throw ValidationError("max_cooccurring cannot exceed the event count");
  const auto c = static_cast<std::size_t>(
      rng.below(static_cast<std::uint64_t>(max_cooccurring) + 1));
  std::vector<std::size_t> pool(e);
  for (std::size_t i = 0; i < e; ++i) pool[i] = i;
  EventVector v(e);
  for (std::size_t i = 0; i < c; ++i) {
    const auto j =
        i + static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(e - i)));
    std::swap(pool[i], pool[j]);
    v.set(pool[i]);
  }
  return v;
}

// Always guesses that no event occurred. Surprisingly strong under the
// heavy no-event imbalance of real gameplay.
inline EventVector no_event_baseline(std::size_t e) { return EventVector(e); }

}  // namespace pixlog
