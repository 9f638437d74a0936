#pragma once

// Multi-label random forest over flattened downsampled pixels, plus its
// versioned text serialization. Each tree trains on a bootstrap sample;
// splits maximize the mean per-event Gini reduction over sqrt(F) randomly
// sampled features.

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
#include "pixlog/train.hpp"

namespace pixlog {

struct ForestConfig {
  std::int64_t tree_count = 10;
  std::int64_t max_depth = 100;
  std::int64_t features_per_split = 0;  // 0 = floor(sqrt(feature count))
  std::int64_t min_samples_split = 2;
  std::uint64_t seed = 0;

  void validate() const {
    if (tree_count < 1) throw ValidationError("tree_count must be >= 1");
    if (max_depth < 1) throw ValidationError("max_depth must be >= 1");
    if (min_samples_split < 2)
      throw ValidationError("min_samples_split must be >= 2");
  }
};

struct ForestNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  float threshold = 0.0f;     // go left when value <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  EventVector votes;          // leaf only: per-event majority of samples
};

struct Forest {
  std::int64_t events = 0;
  std::int64_t features = 0;
  std::int64_t input_h = 0, input_w = 0, input_c = 0;
  std::uint64_t seed = 0;
  std::int64_t max_depth = 0;
  std::vector<std::vector<ForestNode>> trees;

  // longest root-to-leaf path, in edges
  std::int64_t tree_depth(std::size_t t) const {
    const auto& nodes = trees[t];
    std::vector<std::pair<std::int32_t, std::int64_t>> stack{{0, 0}};
    std::int64_t best = 0;
    while (!stack.empty()) {
      auto [idx, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      const auto& n = nodes[static_cast<std::size_t>(idx)];
      if (n.feature >= 0) {
        stack.push_back({n.left, d + 1});
        stack.push_back({n.right, d + 1});
      }
    }
    return best;
  }
};

namespace forest_detail {

struct Builder {
  const DataSet* ds;
  const ForestConfig* config;
  std::int64_t features;
  std::int64_t events;
  std::int64_t mtry;

  std::vector<ForestNode> build_tree(Rng rng) {
    // bootstrap sample, with replacement
    std::vector<std::int32_t> samples(static_cast<std::size_t>(ds->n));
    for (auto& s : samples)
      s = static_cast<std::int32_t>(rng.below(
          static_cast<std::uint64_t>(ds->n)));
    std::vector<ForestNode> nodes;
    grow(nodes, samples, 0, rng);
    return nodes;
  }

  float feature_value(std::int32_t sample, std::int64_t f) const {
    return ds->x0[static_cast<std::size_t>(sample) * ds->sample_numel + f];
  }

  EventVector majority_votes(const std::vector<std::int32_t>& samples) const {
    EventVector v(static_cast<std::size_t>(events));
    for (std::int64_t e = 0; e < events; ++e) {
      std::size_t active = 0;
      for (auto s : samples)
        if (ds->events[static_cast<std::size_t>(s)].test(
                static_cast<std::size_t>(e)))
          ++active;
      // strict majority; an exact tie stays inactive
      v.set(static_cast<std::size_t>(e), 2 * active > samples.size());
    }
    return v;
  }

  bool labels_identical(const std::vector<std::int32_t>& samples) const {
    const auto& first = ds->events[static_cast<std::size_t>(samples[0])];
    for (auto s : samples)
      if (!(ds->events[static_cast<std::size_t>(s)] == first)) return false;
    return true;
  }

  // mean per-event Gini impurity of a label-count vector
  static double gini(const std::vector<std::int64_t>& active,
                     std::int64_t total, std::int64_t events) {
    if (total == 0) return 0.0;
    double g = 0.0;
    for (std::int64_t e = 0; e < events; ++e) {
      const double p =
          static_cast<double>(active[static_cast<std::size_t>(e)]) /
          static_cast<double>(total);
      g += 2.0 * p * (1.0 - p);
    }
    return g / static_cast<double>(events);
  }

  std::int32_t grow(std::vector<ForestNode>& nodes,
                    std::vector<std::int32_t>& samples, std::int64_t depth,
                    Rng& rng) {
    const auto id = static_cast<std::int32_t>(nodes.size());
    nodes.emplace_back();
    const auto n = static_cast<std::int64_t>(samples.size());
    if (depth >= config->max_depth ||
        n < config->min_samples_split || labels_identical(samples)) {
      nodes[static_cast<std::size_t>(id)].votes = majority_votes(samples);
      return id;
    }

    // candidate features, sampled without replacement
    std::vector<std::int64_t> cand;
    {
      std::vector<std::int64_t> pool(static_cast<std::size_t>(features));
      for (std::int64_t f = 0; f < features; ++f)
        pool[static_cast<std::size_t>(f)] = f;
      for (std::int64_t i = 0; i < mtry; ++i) {
        const auto j = i + static_cast<std::int64_t>(rng.below(
                               static_cast<std::uint64_t>(features - i)));
        std::swap(pool[static_cast<std::size_t>(i)],
                  pool[static_cast<std::size_t>(j)]);
        cand.push_back(pool[static_cast<std::size_t>(i)]);
      }
    }

    std::vector<std::int64_t> total_active(static_cast<std::size_t>(events), 0);
    for (auto s : samples)
      for (std::int64_t e = 0; e < events; ++e)
        if (ds->events[static_cast<std::size_t>(s)].test(
                static_cast<std::size_t>(e)))
          ++total_active[static_cast<std::size_t>(e)];
    const double parent = gini(total_active, n, events);

    double best_gain = 0.0;
    std::int64_t best_feature = -1;
    float best_threshold = 0.0f;
    std::vector<std::int32_t> sorted = samples;
    std::vector<std::int64_t> left_active(static_cast<std::size_t>(events));
    for (auto f : cand) {
      std::stable_sort(sorted.begin(), sorted.end(),
                       [&](std::int32_t a, std::int32_t b) {
                         return feature_value(a, f) < feature_value(b, f);
                       });
      std::fill(left_active.begin(), left_active.end(), 0);
      for (std::int64_t i = 0; i < n - 1; ++i) {
        const auto s = sorted[static_cast<std::size_t>(i)];
        for (std::int64_t e = 0; e < events; ++e)
          if (ds->events[static_cast<std::size_t>(s)].test(
                  static_cast<std::size_t>(e)))
            ++left_active[static_cast<std::size_t>(e)];
        const float v0 = feature_value(s, f);
        const float v1 = feature_value(sorted[static_cast<std::size_t>(i + 1)], f);
        if (v0 == v1) continue;  // no threshold separates equal values
        const std::int64_t nl = i + 1, nr = n - nl;
        std::vector<std::int64_t> right_active(total_active);
        for (std::int64_t e = 0; e < events; ++e)
          right_active[static_cast<std::size_t>(e)] -=
              left_active[static_cast<std::size_t>(e)];
        const double child =
            (static_cast<double>(nl) * gini(left_active, nl, events) +
             static_cast<double>(nr) * gini(right_active, nr, events)) /
            static_cast<double>(n);
        const double gain = parent - child;
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best_feature = f;
          best_threshold = v0 + (v1 - v0) / 2.0f;
        }
      }
    }

    if (best_feature < 0) {
      nodes[static_cast<std::size_t>(id)].votes = majority_votes(samples);
      return id;
    }

    std::vector<std::int32_t> left, right;
    for (auto s : samples) {
      if (feature_value(s, best_feature) <= best_threshold)
        left.push_back(s);
      else
        right.push_back(s);
    }
    if (left.empty() || right.empty()) {
      nodes[static_cast<std::size_t>(id)].votes = majority_votes(samples);
      return id;
    }
    nodes[static_cast<std::size_t>(id)].feature =
        static_cast<std::int32_t>(best_feature);
    nodes[static_cast<std::size_t>(id)].threshold = best_threshold;
    const auto l = grow(nodes, left, depth + 1, rng);
    nodes[static_cast<std::size_t>(id)].left = l;
    const auto r = grow(nodes, right, depth + 1, rng);
    nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }
};

}  // namespace forest_detail

inline Forest train_forest(const DataSet& ds, const ForestConfig& config) {
  config.validate();
  if (ds.n == 0) throw ValidationError("cannot train a forest on an empty dataset");
  if (ds.mode != LabelMode::kEvent)
    throw ValidationError("the forest baseline is event-mode only");
  Forest forest;
  forest.events = static_cast<std::int64_t>(ds.events.front().size());
  forest.features = ds.sample_numel;
  forest.seed = config.seed;
  forest.max_depth = config.max_depth;
  forest_detail::Builder builder;
  builder.ds = &ds;
  builder.config = &config;
  builder.features = ds.sample_numel;
  builder.events = forest.events;
  builder.mtry = config.features_per_split > 0
                     ? std::min(config.features_per_split, ds.sample_numel)
                     : std::max<std::int64_t>(
                           1, static_cast<std::int64_t>(std::sqrt(
                                  static_cast<double>(ds.sample_numel))));
  Rng root(config.seed);
  for (std::int64_t t = 0; t < config.tree_count; ++t)
    forest.trees.push_back(
        builder.build_tree(root.fork(static_cast<std::uint64_t>(t))));
  return forest;
}

// Strict-resolution prediction over a raw feature vector.
inline EventVector predict_forest_features(const Forest& forest,
                                           const std::vector<float>& x) {
  if (static_cast<std::int64_t>(x.size()) != forest.features)
    throw ValidationError("feature vector length does not match forest");
  std::vector<std::int64_t> votes(static_cast<std::size_t>(forest.events), 0);
  for (const auto& tree : forest.trees) {
    std::int32_t at = 0;
    while (tree[static_cast<std::size_t>(at)].feature >= 0) {
      const auto& node = tree[static_cast<std::size_t>(at)];
      at = x[static_cast<std::size_t>(node.feature)] <= node.threshold
               ? node.left
               : node.right;
    }
    for (std::int64_t e = 0; e < forest.events; ++e)
      if (tree[static_cast<std::size_t>(at)].votes.test(
              static_cast<std::size_t>(e)))
        ++votes[static_cast<std::size_t>(e)];
  }
  EventVector out(static_cast<std::size_t>(forest.events));
  for (std::int64_t e = 0; e < forest.events; ++e)
    out.set(static_cast<std::size_t>(e),
            2 * votes[static_cast<std::size_t>(e)] >
                static_cast<std::int64_t>(forest.trees.size()));
  return out;
}

// Per-event majority vote across trees; an exact half-split resolves to
// inactive. The image must already be at the training resolution.
inline EventVector predict_forest(const Forest& forest, const FrameImage& img) {
  if (img.width != forest.input_w || img.height != forest.input_h ||
      img.channels != forest.input_c)
    throw ValidationError("image resolution does not match forest training resolution");
  std::vector<float> x(static_cast<std::size_t>(forest.features));
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int xx = 0; xx < img.width; ++xx)
        x[(static_cast<std::size_t>(c) * img.height + y) * img.width + xx] =
            static_cast<float>(img.at(xx, y, c)) / 255.0f;
  return predict_forest_features(forest, x);
}

inline void save_forest(const Forest& forest,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open forest file for writing: " + path.string());
  out << "pixlog-forest 1\n";
  out << "trees " << forest.trees.size() << "\n";
  out << "events " << forest.events << "\n";
  out << "features " << forest.features << "\n";
  out << "input " << forest.input_h << "x" << forest.input_w << "x"
      << forest.input_c << "\n";
  out << "seed " << forest.seed << "\n";
  out << "max_depth " << forest.max_depth << "\n";
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    out << "tree " << t << " " << forest.trees[t].size() << "\n";
    for (const auto& n : forest.trees[t]) {
      out << "node " << n.feature << " "
          << format_double(static_cast<double>(n.threshold)) << " " << n.left
          << " " << n.right << " ";
      if (n.feature >= 0) {
        out << "-";
      } else {
        auto act = n.votes.active();
        if (act.empty()) out << "-";
        for (std::size_t i = 0; i < act.size(); ++i)
          out << (i ? "," : "") << act[i];
      }
      out << "\n";
    }
  }
  if (!out) throw IoError("short write: " + path.string());
}

inline Forest load_forest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open forest file: " + path.string());
  std::string line;
  auto next = [&](const char* what) -> const std::string& {
    if (!std::getline(in, line))
      throw FormatError(std::string("forest file truncated before ") + what);
    return line;
  };
  if (next("magic") != "pixlog-forest 1")
    throw FormatError("not a pixlog forest file: " + path.string());
  Forest forest;
  std::size_t tree_count = 0;
  auto kv = [&](const char* key) {
    auto f = split(next(key), ' ');
    if (f.size() != 2 || f[0] != key)
      throw FormatError(std::string("expected '") + key + "' line");
    return std::string(f[1]);
  };
  tree_count = static_cast<std::size_t>(parse_int(kv("trees"), "trees"));
  forest.events = parse_int(kv("events"), "events");
  forest.features = parse_int(kv("features"), "features");
  {
    const std::string input = kv("input");
    auto dims = split(input, 'x');
    if (dims.size() != 3) throw FormatError("bad forest input dims");
    forest.input_h = parse_int(dims[0], "input h");
    forest.input_w = parse_int(dims[1], "input w");
    forest.input_c = parse_int(dims[2], "input c");
  }
  forest.seed = parse_uint64(kv("seed"), "seed");
  forest.max_depth = parse_int(kv("max_depth"), "max_depth");
  for (std::size_t t = 0; t < tree_count; ++t) {
    auto f = split(next("tree"), ' ');
    if (f.size() != 3 || f[0] != "tree")
      throw FormatError("expected tree line");
    const auto nodes = static_cast<std::size_t>(parse_int(f[2], "node count"));
    std::vector<ForestNode> tree;
    tree.reserve(nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
      auto nf = split(next("node"), ' ');
      if (nf.size() != 6 || nf[0] != "node")
        throw FormatError("bad node line '" + line + "'");
      ForestNode node;
      node.feature = static_cast<std::int32_t>(parse_int(nf[1], "feature"));
      node.threshold =
          static_cast<float>(parse_double(nf[2], "threshold"));
      node.left = static_cast<std::int32_t>(parse_int(nf[3], "left"));
      node.right = static_cast<std::int32_t>(parse_int(nf[4], "right"));
      node.votes = EventVector(static_cast<std::size_t>(forest.events));
      if (node.feature < 0 && nf[5] != "-")
        for (auto part : split(nf[5], ','))
          node.votes.set(
              static_cast<std::size_t>(parse_int(part, "vote index")));
      tree.push_back(std::move(node));
    }
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

}  // namespace pixlog
