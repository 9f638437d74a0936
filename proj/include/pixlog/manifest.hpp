#pragma once

// DatasetManifest: the serialized pairing of frames and labels. Text format,
// line-delimited, one header block then one record per frame:
//
//   pixlog-manifest 1
//   fps 12
//   mode event
//   vocab coin jump stomp
//   late_events 0
//   frame 0 0 frames/000000.ppm -
//   frame 4 0.3333333333333333 frames/000004.ppm 0,2
//
// Event-mode labels are the set indices of active events ('-' when none);
// activity-mode labels are a single class index. Image paths are relative
// to the manifest's directory. Timestamps always equal frame_index / fps.

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pixlog/common.hpp"
#include "pixlog/events.hpp"
#include "pixlog/image.hpp"

namespace pixlog {

// Malformed manifest/checkpoint/log text. Kept distinct from plain
// ValidationError so callers can tell a broken file from a legal file that
// violates dataset invariants.
class FormatError : public ValidationError {
 public:
  explicit FormatError(const std::string& msg) : ValidationError(msg) {}
};

enum class LabelMode { kEvent, kActivity };

inline std::string to_string(LabelMode m) {
  return m == LabelMode::kEvent ? "event" : "activity";
}

inline LabelMode label_mode_from_string(const std::string& s) {
  if (s == "event") return LabelMode::kEvent;
  if (s == "activity") return LabelMode::kActivity;
  throw FormatError("unknown label mode '" + s + "'");
}

struct LabeledFrame {
  std::int64_t frame_index = 0;
  double timestamp = 0.0;       // always frame_index / target_fps
  std::string image_path;       // relative to the manifest file
  EventVector events;           // event mode
  std::int64_t activity = -1;   // activity mode
};

struct DatasetManifest {
  double target_fps = 0.0;
  LabelMode mode = LabelMode::kEvent;
  EventVocabulary vocabulary;
  std::int64_t late_events = 0;  // log entries that fell past the last frame
  std::vector<LabeledFrame> entries;

  std::size_t size() const { return entries.size(); }

  void validate() const {
    if (!(target_fps > 0)) throw ValidationError("manifest fps must be > 0");
    if (vocabulary.size() == 0)
      throw ValidationError("manifest vocabulary is empty");
    if (late_events < 0) throw ValidationError("negative late_events");
    std::int64_t prev = -1;
    for (const auto& e : entries) {
      if (e.frame_index <= prev)
        throw ValidationError("manifest entries not sorted by frame_index");
      prev = e.frame_index;
      double want = static_cast<double>(e.frame_index) / target_fps;
      double tol = 1e-9 * std::max(1.0, want);
      if (e.timestamp < want - tol || e.timestamp > want + tol)
        throw ValidationError("timestamp of frame " +
                              std::to_string(e.frame_index) +
                              " does not equal frame_index / fps");
      if (e.image_path.empty())
        throw ValidationError("entry with empty image path");
      if (mode == LabelMode::kEvent) {
        if (e.events.size() != vocabulary.size())
          throw ValidationError(
              "label length " + std::to_string(e.events.size()) +
              " does not match vocabulary size " +
              std::to_string(vocabulary.size()));
      } else {
        if (e.activity < 0 ||
            e.activity >= static_cast<std::int64_t>(vocabulary.size()))
          throw ValidationError("activity label out of range on frame " +
                                std::to_string(e.frame_index));
      }
    }
  }

  // Fraction of entries with no active event (event mode).
  double empty_fraction() const {
    if (entries.empty()) return 1.0;
    std::size_t empty = 0;
    for (const auto& e : entries)
      if (e.events.empty_set()) ++empty;
    return static_cast<double>(empty) / static_cast<double>(entries.size());
  }

  // Largest number of co-occurring events in any frame (event mode).
  std::size_t max_cooccurrence() const {
    std::size_t m = 0;
    for (const auto& e : entries) m = std::max(m, e.events.count());
    return m;
  }
};

inline void save_manifest(const DatasetManifest& m,
                          const std::filesystem::path& path) {
  m.validate();
  std::ofstream out(path, std::ios::binary);  // binary: no newline surprises
  if (!out) throw IoError("cannot open manifest for writing: " + path.string());
  out << "pixlog-manifest 1\n";
  out << "fps " << format_double(m.target_fps) << "\n";
  out << "mode " << to_string(m.mode) << "\n";
  out << "vocab";
  for (const auto& n : m.vocabulary.names()) out << " " << n;
  out << "\n";
  out << "late_events " << m.late_events << "\n";
  for (const auto& e : m.entries) {
    out << "frame " << e.frame_index << " "
        << format_double(static_cast<double>(e.frame_index) / m.target_fps)
        << " " << e.image_path << " ";
    if (m.mode == LabelMode::kActivity) {
      out << e.activity;
    } else {
      auto act = e.events.active();
      if (act.empty()) {
        out << "-";
      } else {
        for (std::size_t i = 0; i < act.size(); ++i)
          out << (i ? "," : "") << act[i];
      }
    }
    out << "\n";
  }
  if (!out) throw IoError("short write: " + path.string());
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  std::string line;
  auto next_line = [&](const char* what) -> const std::string& {
    if (!std::getline(in, line))
      throw FormatError(std::string("manifest truncated before ") + what +
                        ": " + path.string());
    return line;
  };
  if (next_line("magic") != "pixlog-manifest 1")
    throw FormatError("not a pixlog manifest (bad magic): " + path.string());

  DatasetManifest m;
  {
    auto f = split(next_line("fps"), ' ');
    if (f.size() != 2 || f[0] != "fps") throw FormatError("expected fps line");
    m.target_fps = parse_double(f[1], "manifest fps");
  }
  {
    auto f = split(next_line("mode"), ' ');
    if (f.size() != 2 || f[0] != "mode") throw FormatError("expected mode line");
    m.mode = label_mode_from_string(std::string(f[1]));
  }
  {
    auto f = split(next_line("vocab"), ' ');
    if (f.size() < 2 || f[0] != "vocab")
      throw FormatError("expected vocab line");
    std::vector<std::string> names(f.begin() + 1, f.end());
    m.vocabulary = EventVocabulary(std::move(names));
  }
  {
    auto f = split(next_line("late_events"), ' ');
    if (f.size() != 2 || f[0] != "late_events")
      throw FormatError("expected late_events line");
    m.late_events = parse_int(f[1], "late_events");
  }
  const std::size_t e = m.vocabulary.size();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split(line, ' ');
    if (f.size() != 5 || f[0] != "frame")
      throw FormatError("bad frame record '" + line + "'");
    LabeledFrame fr;
    fr.frame_index = parse_int(f[1], "frame index");
    fr.timestamp = parse_double(f[2], "frame timestamp");
    fr.image_path = std::string(f[3]);
    if (m.mode == LabelMode::kActivity) {
      fr.activity = parse_int(f[4], "activity label");
    } else {
      fr.events = EventVector(e);
      if (f[4] != "-") {
        for (auto part : split(f[4], ',')) {
          std::int64_t idx = parse_int(part, "event index");
          if (idx < 0 || idx >= static_cast<std::int64_t>(e))
            throw ValidationError("event index " + std::to_string(idx) +
                                  " outside vocabulary of size " +
                                  std::to_string(e));
          fr.events.set(static_cast<std::size_t>(idx));
        }
      }
    }
    m.entries.push_back(std::move(fr));
  }
  m.validate();
  return m;
}

// Loads the image behind one manifest entry. Missing files surface as
// IoError naming the path.
inline FrameImage load_entry_image(const DatasetManifest&,
                                   const std::filesystem::path& manifest_dir,
                                   const LabeledFrame& entry) {
  std::filesystem::path p = entry.image_path;
  if (p.is_relative()) p = manifest_dir / p;
  if (!std::filesystem::exists(p))
    throw IoError("manifest references missing image: " + p.string());
  return load_image(p);
}

// Pluggable frame access so pipelines can run off disk or straight from a
// generator's in-memory frames.
using ImageSource =
    std::function<FrameImage(std::size_t index, const LabeledFrame& entry)>;

inline ImageSource file_image_source(const DatasetManifest& manifest,
                                     std::filesystem::path manifest_dir) {
  return [&manifest, dir = std::move(manifest_dir)](
             std::size_t, const LabeledFrame& e) {
    return load_entry_image(manifest, dir, e);
  };
}

// New manifest over a subset of event types. Event mode keeps every frame
// and drops the other bits; activity mode keeps only frames whose class
// survives, remapped to the new indices.
inline DatasetManifest restrict_vocabulary(
    const DatasetManifest& m, const std::vector<std::string>& keep) {
  EventVocabulary vocab(keep);
  std::vector<std::size_t> src_index(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    std::size_t idx = m.vocabulary.find(keep[i]);
    if (idx == EventVocabulary::npos)
      throw ValidationError("event '" + keep[i] +
                            "' not present in source vocabulary");
    src_index[i] = idx;
  }
  DatasetManifest out;
  out.target_fps = m.target_fps;
  out.mode = m.mode;
  out.vocabulary = vocab;
  out.late_events = m.late_events;
  if (m.mode == LabelMode::kEvent) {
    out.entries.reserve(m.entries.size());
    for (const auto& e : m.entries) {
      LabeledFrame fr = e;
      fr.events = EventVector(keep.size());
      for (std::size_t i = 0; i < keep.size(); ++i)
        fr.events.set(i, e.events.test(src_index[i]));
      out.entries.push_back(std::move(fr));
    }
  } else {
    std::int64_t next = 0;
    for (const auto& e : m.entries) {
      for (std::size_t i = 0; i < keep.size(); ++i) {
        if (e.activity == static_cast<std::int64_t>(src_index[i])) {
          LabeledFrame fr = e;
          fr.activity = static_cast<std::int64_t>(i);
          fr.frame_index = next;
          fr.timestamp = static_cast<double>(next) / m.target_fps;
          ++next;
          out.entries.push_back(std::move(fr));
          break;
        }
      }
    }
  }
  out.validate();
  return out;
}

// Concatenation for combined-domain training. Vocabularies must be
// identical; frames are re-indexed on the first manifest's clock. Image
// paths are made absolute against each source directory so the result is
// usable from anywhere.
inline DatasetManifest concat_manifests(
    const std::vector<std::pair<DatasetManifest, std::filesystem::path>>&
        parts) {
  if (parts.empty()) throw ValidationError("no manifests to concatenate");
  DatasetManifest out;
  out.target_fps = parts.front().first.target_fps;
  out.mode = parts.front().first.mode;
  out.vocabulary = parts.front().first.vocabulary;
  std::int64_t next = 0;
  for (const auto& [m, dir] : parts) {
    if (m.vocabulary != out.vocabulary) {
      std::string diff = "vocabulary mismatch between manifests:";
      for (const auto& n : out.vocabulary.names()) diff += " " + n;
      diff += " vs";
      for (const auto& n : m.vocabulary.names()) diff += " " + n;
      throw ValidationError(diff);
    }
    if (m.mode != out.mode)
      throw ValidationError("label mode mismatch between manifests");
    out.late_events += m.late_events;
    for (const auto& e : m.entries) {
      LabeledFrame fr = e;
      std::filesystem::path p = e.image_path;
      if (p.is_relative()) p = dir / p;
      fr.image_path = p.string();
      fr.frame_index = next;
      fr.timestamp = static_cast<double>(next) / out.target_fps;
      ++next;
      out.entries.push_back(std::move(fr));
    }
  }
  out.validate();
  return out;
}

}  // namespace pixlog
