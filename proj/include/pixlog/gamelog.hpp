#pragma once

// The final deliverable: a structured game log. Holds both views of the
// same information — per-frame event records and merged per-event time
// intervals — so downstream consumers can pick either.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pixlog/common.hpp"
#include "pixlog/events.hpp"

namespace pixlog {

struct LogInterval {
  double start = 0.0;  // inclusive, seconds
  double end = 0.0;    // exclusive
};

struct GameLogFrame {
  std::int64_t frame_index = 0;
  double timestamp = 0.0;
  std::vector<std::size_t> active;  // event indices, ascending
};

struct GameLog {
  EventVocabulary vocabulary;
  double fps = 0.0;
  std::int64_t frame_count = 0;
  std::uint64_t source_hash = 0;  // hash of the source manifest; 0 = none
  std::vector<GameLogFrame> frames;                 // only frames with events
  std::vector<std::vector<LogInterval>> intervals;  // per event type

  void validate() const {
    if (!(fps > 0)) throw ValidationError("game log fps must be > 0");
    if (frame_count < 0) throw ValidationError("negative frame count");
    if (intervals.size() != vocabulary.size())
      throw ValidationError("interval table does not match vocabulary");
    for (const auto& per_event : intervals) {
      double prev_end = -1.0;
      for (const auto& iv : per_event) {
        if (!(iv.end > iv.start))
          throw ValidationError("empty or inverted interval");
        if (iv.start < prev_end)
          throw ValidationError("overlapping intervals for one event type");
        prev_end = iv.end;
      }
    }
    for (const auto& fr : frames) {
      if (fr.frame_index < 0 || fr.frame_index >= frame_count)
        throw ValidationError("frame record outside the frame range");
      if (fr.active.empty())
        throw ValidationError("frame record with no active events");
    }
  }
};

// Builds the log from per-frame predictions: a frame record for every frame
// with at least one active event, and per event type one interval
// [first/fps, (last+1)/fps) per maximal run of consecutive active frames.
inline GameLog emit_log(const std::vector<EventVector>& predictions,
                        double fps, const EventVocabulary& vocabulary) {
  if (!(fps > 0)) throw ValidationError("fps must be > 0");
  const std::size_t e = vocabulary.size();
  GameLog log;
  log.vocabulary = vocabulary;
  log.fps = fps;
  log.frame_count = static_cast<std::int64_t>(predictions.size());
  log.intervals.resize(e);
  for (std::size_t f = 0; f < predictions.size(); ++f) {
    if (predictions[f].size() != e)
      throw ValidationError("prediction length does not match vocabulary");
    auto active = predictions[f].active();
    if (active.empty()) continue;
    GameLogFrame fr;
    fr.frame_index = static_cast<std::int64_t>(f);
    fr.timestamp = static_cast<double>(f) / fps;
    fr.active = std::move(active);
    log.frames.push_back(std::move(fr));
  }
  for (std::size_t ev = 0; ev < e; ++ev) {
    std::size_t run_start = 0;
    bool in_run = false;
    for (std::size_t f = 0; f <= predictions.size(); ++f) {
      const bool active = f < predictions.size() && predictions[f].test(ev);
      if (active && !in_run) {
        run_start = f;
        in_run = true;
      } else if (!active && in_run) {
        log.intervals[ev].push_back(
            {static_cast<double>(run_start) / fps,
             static_cast<double>(f) / fps});
        in_run = false;
      }
    }
  }
  log.validate();
  return log;
}

// Inverse of emit_log over the interval view: samples every interval at the
// frame clock.
inline std::vector<EventVector> rasterize_log(const GameLog& log) {
  log.validate();
  std::vector<EventVector> out(
      static_cast<std::size_t>(log.frame_count),
      EventVector(log.vocabulary.size()));
  for (std::size_t ev = 0; ev < log.intervals.size(); ++ev) {
    for (const auto& iv : log.intervals[ev]) {
      const auto first = std::llround(iv.start * log.fps);
      const auto last = std::llround(iv.end * log.fps) - 1;
      for (std::int64_t f = first; f <= last && f < log.frame_count; ++f)
        if (f >= 0) out[static_cast<std::size_t>(f)].set(ev);
    }
  }
  return out;
}

struct EventAgreement {
  std::string event;
  double agreement = 1.0;      // 1 - symmetric difference / total frames
  std::int64_t missed = 0;     // active in the reference, not the candidate
  std::int64_t spurious = 0;   // active in the candidate, not the reference
};

// Frame-level agreement of a candidate log against a reference log.
inline std::vector<EventAgreement> log_diff(const GameLog& reference,
                                            const GameLog& candidate) {
  if (reference.vocabulary != candidate.vocabulary)
    throw ValidationError("log vocabularies differ");
  if (reference.fps != candidate.fps)
    throw ValidationError("log frame rates differ");
  const std::int64_t total =
      std::max(reference.frame_count, candidate.frame_count);
  auto ra = rasterize_log(reference);
  auto rb = rasterize_log(candidate);
  std::vector<EventAgreement> out;
  for (std::size_t ev = 0; ev < reference.vocabulary.size(); ++ev) {
    EventAgreement ag;
    ag.event = reference.vocabulary.name(ev);
    for (std::int64_t f = 0; f < total; ++f) {
      const bool a = f < static_cast<std::int64_t>(ra.size()) &&
                     ra[static_cast<std::size_t>(f)].test(ev);
      const bool b = f < static_cast<std::int64_t>(rb.size()) &&
                     rb[static_cast<std::size_t>(f)].test(ev);
      if (a && !b) ++ag.missed;
      if (b && !a) ++ag.spurious;
    }
    ag.agreement =
        total == 0 ? 1.0
                   : 1.0 - static_cast<double>(ag.missed + ag.spurious) /
                               static_cast<double>(total);
    out.push_back(std::move(ag));
  }
  return out;
}

inline void save_log(const GameLog& log, const std::filesystem::path& path) {
  log.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open log for writing: " + path.string());
  out << "pixlog-gamelog 1\n";
  out << "fps " << format_double(log.fps) << "\n";
  out << "frames " << log.frame_count << "\n";
  out << "vocab";
  for (const auto& n : log.vocabulary.names()) out << " " << n;
  out << "\n";
  out << "source " << log.source_hash << "\n";
  for (const auto& fr : log.frames) {
    out << "frame " << fr.frame_index << " "
        << format_double(static_cast<double>(fr.frame_index) / log.fps) << " ";
    for (std::size_t i = 0; i < fr.active.size(); ++i)
      out << (i ? "," : "") << fr.active[i];
    out << "\n";
  }
  for (std::size_t ev = 0; ev < log.intervals.size(); ++ev)
    for (const auto& iv : log.intervals[ev])
      out << "interval " << ev << " " << format_double(iv.start) << " "
          << format_double(iv.end) << "\n";
  if (!out) throw IoError("short write: " + path.string());
}

inline GameLog load_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open log: " + path.string());
  std::string line;
  auto next = [&](const char* what) -> const std::string& {
    if (!std::getline(in, line))
      throw FormatError(std::string("log truncated before ") + what);
    return line;
  };
  if (next("magic") != "pixlog-gamelog 1")
    throw FormatError("not a pixlog game log: " + path.string());
  GameLog log;
  {
    auto f = split(next("fps"), ' ');
    if (f.size() != 2 || f[0] != "fps") throw FormatError("expected fps line");
    log.fps = parse_double(f[1], "log fps");
  }
  {
    auto f = split(next("frames"), ' ');
    if (f.size() != 2 || f[0] != "frames")
      throw FormatError("expected frames line");
    log.frame_count = parse_int(f[1], "frame count");
  }
  {
    auto f = split(next("vocab"), ' ');
    if (f.size() < 2 || f[0] != "vocab")
      throw FormatError("expected vocab line");
    log.vocabulary = EventVocabulary({f.begin() + 1, f.end()});
  }
  {
    auto f = split(next("source"), ' ');
    if (f.size() != 2 || f[0] != "source")
      throw FormatError("expected source line");
    log.source_hash = parse_uint64(f[1], "source");
  }
  log.intervals.resize(log.vocabulary.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split(line, ' ');
    if (f[0] == "frame") {
      if (f.size() != 4) throw FormatError("bad frame record '" + line + "'");
      GameLogFrame fr;
      fr.frame_index = parse_int(f[1], "frame index");
      fr.timestamp = parse_double(f[2], "frame timestamp");
      for (auto part : split(f[3], ','))
        fr.active.push_back(
            static_cast<std::size_t>(parse_int(part, "event index")));
      log.frames.push_back(std::move(fr));
    } else if (f[0] == "interval") {
      if (f.size() != 4) throw FormatError("bad interval record '" + line + "'");
      const auto ev = static_cast<std::size_t>(parse_int(f[1], "event index"));
      if (ev >= log.intervals.size())
        throw ValidationError("interval event index outside vocabulary");
      log.intervals[ev].push_back({parse_double(f[2], "interval start"),
                                   parse_double(f[3], "interval end")});
    } else {
      throw FormatError("unknown log record '" + line + "'");
    }
  }
  log.validate();
  return log;
}

}  // namespace pixlog
