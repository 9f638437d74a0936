#pragma once

// Test fixtures: temp directories and randomized artifacts for round-trip
// properties.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pixlog/builders.hpp"
#include "pixlog/common.hpp"
#include "pixlog/manifest.hpp"
#include "pixlog/model.hpp"

namespace testutil {

class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0; i < 10000; ++i) {
      auto candidate = base / ("pixlog-test-" + std::to_string(counter_++));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("could not create temp directory");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

inline pixlog::DatasetManifest random_manifest(pixlog::Rng& rng) {
  pixlog::DatasetManifest m;
  const auto e = 1 + rng.below(12);
  std::vector<std::string> names;
  for (std::uint64_t i = 0; i < e; ++i)
    names.push_back("ev" + std::to_string(i) + "_" +
                    std::to_string(rng.below(1000)));
  // names must be unique; the numeric prefix already guarantees it
  m.vocabulary = pixlog::EventVocabulary(names);
  m.mode = rng.bernoulli(0.5) ? pixlog::LabelMode::kEvent
                              : pixlog::LabelMode::kActivity;
  m.target_fps = 1.0 + rng.uniform() * 59.0;
  m.late_events = static_cast<std::int64_t>(rng.below(3));
  const auto n = 1 + rng.below(40);
  std::int64_t frame = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    pixlog::LabeledFrame fr;
    frame += 1 + static_cast<std::int64_t>(rng.below(3));
    fr.frame_index = frame;
    fr.timestamp = static_cast<double>(frame) / m.target_fps;
    fr.image_path = "frames/" + std::to_string(i) + ".ppm";
    if (m.mode == pixlog::LabelMode::kEvent) {
      fr.events = pixlog::EventVector(e);
      for (std::uint64_t b = 0; b < e; ++b)
        if (rng.bernoulli(0.2)) fr.events.set(b);
    } else {
      fr.activity = static_cast<std::int64_t>(rng.below(e));
    }
    m.entries.push_back(std::move(fr));
  }
  return m;
}

inline pixlog::ModelSpec random_tiny_spec(pixlog::Rng& rng) {
  pixlog::ModelSpec s;
  const bool residual = rng.bernoulli(0.4);
  const bool activity = residual || rng.bernoulli(0.5);
  s.mode = activity ? pixlog::LabelMode::kActivity : pixlog::LabelMode::kEvent;
  s.output_activation = activity ? pixlog::OutputActivation::kSoftmax
                                 : pixlog::OutputActivation::kSigmoid;
  const std::int64_t hw = 6 + static_cast<std::int64_t>(rng.below(3)) * 2;
  s.input = {hw, hw, rng.bernoulli(0.5) ? 1 : 3, 1};
  s.output_size = 2 + static_cast<std::int64_t>(rng.below(3));
  if (residual) {
    s.style = pixlog::BlockStyle::kResidual;
    if (rng.bernoulli(0.5)) s.input.streams = 2;
    s.stem_filters = 2 + static_cast<std::int64_t>(rng.below(2));
    s.stages = {{2 + static_cast<std::int64_t>(rng.below(2)), 1, 1},
                {3, 1, 2}};
  } else {
    s.style = pixlog::BlockStyle::kPlain;
    pixlog::ConvBlock b;
    b.filters = 2 + static_cast<std::int64_t>(rng.below(3));
    b.kernel = 3;
    b.stride = 1;
    b.pad = 1;
    b.pool_size = 2;
    b.pool_stride = 2;
    s.conv_blocks = {b};
    s.fc_widths = {4 + static_cast<std::int64_t>(rng.below(4))};
  }
  s.validate();
  return s;
}

inline pixlog::Checkpoint random_checkpoint(pixlog::Rng& rng) {
  auto spec = random_tiny_spec(rng);
  auto ckpt = pixlog::Checkpoint::fresh(spec, rng.next_u64());
  ckpt.epochs = static_cast<std::int64_t>(rng.below(100));
  if (rng.bernoulli(0.5)) {
    for (std::int64_t i = 0; i < spec.output_size; ++i)
      ckpt.labels.push_back("label" + std::to_string(i));
  }
  return ckpt;
}

}  // namespace testutil
