#pragma once

// Turning raw frame sequences and game-event logs into aligned datasets:
// frame-rate decimation, event-to-frame pairing and frame differencing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pixlog/common.hpp"
#include "pixlog/events.hpp"
#include "pixlog/image.hpp"
#include "pixlog/manifest.hpp"

namespace pixlog {

// Decimation stride: every k-th source frame, k = round(source/target).
inline std::int64_t extraction_stride(double source_fps, double target_fps) {
  if (!(target_fps > 0)) throw ValidationError("target fps must be > 0");
  if (target_fps > source_fps)
    throw ValidationError("cannot upsample: target fps " +
                          format_double(target_fps) + " exceeds source fps " +
                          format_double(source_fps));
  return std::max<std::int64_t>(1, std::llround(source_fps / target_fps));
}

inline std::vector<std::size_t> extraction_indices(std::size_t frame_count,
                                                   double source_fps,
                                                   double target_fps) {
  const auto stride =
      static_cast<std::size_t>(extraction_stride(source_fps, target_fps));
  std::vector<std::size_t> out;
  out.reserve(frame_count / stride + 1);
  for (std::size_t i = 0; i < frame_count; i += stride) out.push_back(i);
  return out;
}

// In-memory variant; output frame j corresponds to timestamp j / target_fps.
inline std::vector<FrameImage> extract_frames(
    const std::vector<FrameImage>& source, double source_fps,
    double target_fps) {
  std::vector<FrameImage> out;
  for (std::size_t i : extraction_indices(source.size(), source_fps, target_fps))
    out.push_back(source[i]);
  return out;
}

struct LogEntry {
  std::string event;
  double timestamp = 0.0;  // seconds from video start
};

// Raw game log: one "<timestamp> <event_name>" per line, '#' comments.
inline std::vector<LogEntry> parse_raw_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open log file: " + path.string());
  std::vector<LogEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line, ' ');
    if (f.size() != 2)
      throw FormatError("bad log line " + std::to_string(lineno) + " in " +
                        path.string());
    LogEntry e;
    e.timestamp = parse_double(f[0], "log timestamp");
    e.event = std::string(f[1]);
    out.push_back(std::move(e));
  }
  return out;
}

// Pairs a timestamped frame sequence with a game-event log. Each event is
// assigned to the earliest frame whose timestamp is at or after the event
// timestamp (the event becomes visible on the next rendered frame). Events
// past the last frame land on the last frame and are counted in
// late_events.
inline DatasetManifest pair_labels(const std::vector<std::string>& frame_paths,
                                   double target_fps,
                                   const EventVocabulary& vocabulary,
                                   const std::vector<LogEntry>& log) {
  if (!(target_fps > 0)) throw ValidationError("target fps must be > 0");
  if (frame_paths.empty())
    throw ValidationError("cannot pair labels with zero frames");

  DatasetManifest m;
  m.target_fps = target_fps;
  m.mode = LabelMode::kEvent;
  m.vocabulary = vocabulary;
  m.entries.resize(frame_paths.size());
  for (std::size_t i = 0; i < frame_paths.size(); ++i) {
    auto& fr = m.entries[i];
    fr.frame_index = static_cast<std::int64_t>(i);
    fr.timestamp = static_cast<double>(i) / target_fps;
    fr.image_path = frame_paths[i];
    fr.events = EventVector(vocabulary.size());
  }

  const std::size_t last = frame_paths.size() - 1;
  for (const auto& entry : log) {
    std::size_t type = vocabulary.find(entry.event);
    if (type == EventVocabulary::npos)
      throw ValidationError("log event '" + entry.event + "' at t=" +
                            format_double(entry.timestamp) +
                            " is not in the vocabulary");
    // earliest frame index i with i / fps >= t  <=>  i >= t * fps
    double raw = entry.timestamp * target_fps;
    std::int64_t idx = static_cast<std::int64_t>(std::ceil(raw - 1e-9));
    if (idx < 0) idx = 0;
    std::size_t frame;
    if (static_cast<std::size_t>(idx) > last) {
      frame = last;
      ++m.late_events;
    } else {
      frame = static_cast<std::size_t>(idx);
    }
    m.entries[frame].events.set(type);
  }
  m.validate();
  return m;
}

// Signed per-pixel difference remapped into 8 bits; zero difference maps to
// mid-scale 128, the extremes saturate to 0 and 255.
inline FrameImage frame_difference(const FrameImage& current,
                                   const FrameImage& previous) {
  current.validate();
  previous.validate();
  if (!current.same_shape(previous))
    throw ValidationError("frame_difference requires identical shapes");
  FrameImage out = FrameImage::make(current.width, current.height,
                                    current.channels);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    int d = static_cast<int>(current.data[i]) - static_cast<int>(previous.data[i]);
    int half = d >= 0 ? (d + 1) / 2 : -((-d + 1) / 2);
    out.data[i] = static_cast<std::uint8_t>(std::clamp(128 + half, 0, 255));
  }
  return out;
}

}  // namespace pixlog
