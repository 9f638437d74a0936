#pragma once

// Event vocabulary and the multi-hot event vector: one bit per event type,
// multiple bits may be set for one frame.

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "pixlog/common.hpp"

namespace pixlog {

// Ordered list of event-type names. The ordering is part of every persisted
// artifact: index i means event i forever.
class EventVocabulary {
 public:
  EventVocabulary() = default;

  explicit EventVocabulary(std::vector<std::string> names)
      : names_(std::move(names)) {
    if (names_.empty())
      throw ValidationError("vocabulary must contain at least one event");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      const std::string& n = names_[i];
      if (n.empty() || n.find_first_of(" \t\n,") != std::string::npos)
        throw ValidationError("event name '" + n +
                              "' contains whitespace or commas");
      if (!index_.emplace(n, i).second)
        throw ValidationError("duplicate event name '" + n + "'");
    }
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  // index of a name, or npos
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? npos : it->second;
  }

  bool operator==(const EventVocabulary& o) const { return names_ == o.names_; }
  bool operator!=(const EventVocabulary& o) const { return !(*this == o); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Length-E binary vector of co-occurring events for one frame.
struct EventVector {
  std::vector<std::uint8_t> bits;

  EventVector() = default;
  explicit EventVector(std::size_t e) : bits(e, 0) {}

  std::size_t size() const { return bits.size(); }
  bool test(std::size_t i) const { return bits[i] != 0; }
  void set(std::size_t i, bool v = true) { bits[i] = v ? 1 : 0; }

  std::size_t count() const {
    return static_cast<std::size_t>(
        std::count(bits.begin(), bits.end(), std::uint8_t{1}));
  }
  bool empty_set() const { return count() == 0; }

  std::vector<std::size_t> active() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i]) out.push_back(i);
    return out;
  }

  static EventVector from_active(std::size_t e,
                                 const std::vector<std::size_t>& idx) {
    EventVector v(e);
    for (std::size_t i : idx) {
      if (i >= e) throw ValidationError("event index out of range");
      v.bits[i] = 1;
    }
    return v;
  }

  bool operator==(const EventVector& o) const { return bits == o.bits; }
  bool operator!=(const EventVector& o) const { return !(*this == o); }
};

}  // namespace pixlog
