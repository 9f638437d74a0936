#pragma once

// Model definition and the forward/backward engine.
//
// A ModelSpec is a declarative architecture description (plain conv stack or
// residual trunk, one or two input streams). It compiles to a flat node
// graph; each node reads one or two earlier nodes, so sequential stacks,
// residual skips and two-stream fusion all run through one engine. The
// engine is templated on the scalar type: float for training/inference,
// double for finite-difference verification.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pixlog/common.hpp"
#include "pixlog/manifest.hpp"
#include "pixlog/tensor.hpp"

namespace pixlog {

enum class OutputActivation { kSigmoid, kSoftmax };
enum class BlockStyle { kPlain, kResidual };

struct ConvBlock {
  std::int64_t filters = 0;
  std::int64_t kernel = 0;
  std::int64_t stride = 1;
  std::int64_t pad = 0;
  std::int64_t pool_size = 0;    // 0 = no pooling after this conv
  std::int64_t pool_stride = 0;
};

struct ResStage {
  std::int64_t channels = 0;
  std::int64_t blocks = 0;
  std::int64_t stride = 1;  // applied by the first block of the stage
};

struct InputShape {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::int64_t channels = 0;
  std::int64_t streams = 1;
};

struct ModelSpec {
  LabelMode mode = LabelMode::kEvent;
  OutputActivation output_activation = OutputActivation::kSigmoid;
  InputShape input;
  BlockStyle style = BlockStyle::kPlain;
  std::vector<ConvBlock> conv_blocks;  // plain style
  std::vector<std::int64_t> fc_widths; // plain style, hidden widths
  std::int64_t stem_filters = 0;       // residual style
  std::vector<ResStage> stages;        // residual style
  std::int64_t output_size = 0;

  void validate() const {
    if (output_size < 1) throw ValidationError("output_size must be >= 1");
    if (mode == LabelMode::kActivity && output_size < 2)
      throw ValidationError("activity mode needs at least two classes");
    if (input.height < 1 || input.width < 1 ||
        (input.channels != 1 && input.channels != 3))
      throw ValidationError("bad model input shape");
    if (input.streams != 1 && input.streams != 2)
      throw ValidationError("streams must be 1 or 2");
    const bool event = mode == LabelMode::kEvent;
    if (event && output_activation != OutputActivation::kSigmoid)
      throw ValidationError("event mode requires the bounded-threshold head");
    if (!event && output_activation != OutputActivation::kSoftmax)
      throw ValidationError(
          "activity mode requires the normalized-exponential head");
    if (input.streams == 2 && event)
      throw ValidationError("two-stream input is only valid in activity mode");
    if (style == BlockStyle::kPlain) {
      if (conv_blocks.empty() && fc_widths.empty() && output_size < 1)
        throw ValidationError("empty plain spec");
      for (const auto& b : conv_blocks)
        if (b.filters < 1 || b.kernel < 1 || b.stride < 1 || b.pad < 0)
          throw ValidationError("bad conv block");
    } else {
      if (stem_filters < 1) throw ValidationError("residual spec needs a stem");
      if (stages.empty()) throw ValidationError("residual spec needs stages");
      for (const auto& s : stages)
        if (s.channels < 1 || s.blocks < 1 || s.stride < 1)
          throw ValidationError("bad residual stage");
    }
  }

  std::string serialize() const;
  static ModelSpec parse(const std::string& line);
};

inline std::string ModelSpec::serialize() const {
  std::string s = "mode=";
  s += (mode == LabelMode::kEvent ? "event" : "activity");
  s += " act=";
  s += (output_activation == OutputActivation::kSigmoid ? "sigmoid"
                                                        : "softmax");
  s += " input=" + std::to_string(input.height) + "x" +
       std::to_string(input.width) + "x" + std::to_string(input.channels) +
       "s" + std::to_string(input.streams);
  if (style == BlockStyle::kPlain) {
    s += " style=plain conv=";
    if (conv_blocks.empty()) s += "-";
    for (std::size_t i = 0; i < conv_blocks.size(); ++i) {
      const auto& b = conv_blocks[i];
      if (i) s += ",";
      s += std::to_string(b.filters) + ":" + std::to_string(b.kernel) + ":" +
           std::to_string(b.stride) + ":" + std::to_string(b.pad) + ":" +
           std::to_string(b.pool_size) + ":" + std::to_string(b.pool_stride);
    }
    s += " fc=";
    if (fc_widths.empty()) s += "-";
    for (std::size_t i = 0; i < fc_widths.size(); ++i)
      s += (i ? "," : "") + std::to_string(fc_widths[i]);
  } else {
    s += " style=residual stem=" + std::to_string(stem_filters) + " stages=";
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const auto& st = stages[i];
      if (i) s += ",";
      s += std::to_string(st.channels) + ":" + std::to_string(st.blocks) +
           ":" + std::to_string(st.stride);
    }
  }
  s += " out=" + std::to_string(output_size);
  return s;
}

inline ModelSpec ModelSpec::parse(const std::string& line) {
  ModelSpec spec;
  std::map<std::string, std::string> kv;
  for (auto field : split(line, ' ')) {
    if (field.empty()) continue;
    auto eq = field.find('=');
    if (eq == std::string_view::npos)
      throw FormatError("bad model spec field '" + std::string(field) + "'");
    kv[std::string(field.substr(0, eq))] = std::string(field.substr(eq + 1));
  }
  auto need = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end())
      throw FormatError(std::string("model spec missing '") + key + "'");
    return it->second;
  };
  spec.mode = label_mode_from_string(need("mode"));
  const std::string& act = need("act");
  if (act == "sigmoid") spec.output_activation = OutputActivation::kSigmoid;
  else if (act == "softmax") spec.output_activation = OutputActivation::kSoftmax;
  else throw FormatError("unknown activation '" + act + "'");
  {
    const std::string& in = need("input");
    auto sx = split(in, 's');
    if (sx.size() != 2) throw FormatError("bad input field");
    auto dims = split(sx[0], 'x');
    if (dims.size() != 3) throw FormatError("bad input dims");
    spec.input.height = parse_int(dims[0], "input height");
    spec.input.width = parse_int(dims[1], "input width");
    spec.input.channels = parse_int(dims[2], "input channels");
    spec.input.streams = parse_int(sx[1], "input streams");
  }
  const std::string& style = need("style");
  if (style == "plain") {
    spec.style = BlockStyle::kPlain;
    const std::string& conv = need("conv");
    if (conv != "-") {
      for (auto block : split(conv, ',')) {
        auto f = split(block, ':');
        if (f.size() != 6) throw FormatError("bad conv block field");
        ConvBlock b;
        b.filters = parse_int(f[0], "conv filters");
        b.kernel = parse_int(f[1], "conv kernel");
        b.stride = parse_int(f[2], "conv stride");
        b.pad = parse_int(f[3], "conv pad");
        b.pool_size = parse_int(f[4], "pool size");
        b.pool_stride = parse_int(f[5], "pool stride");
        spec.conv_blocks.push_back(b);
      }
    }
    const std::string& fc = need("fc");
    if (fc != "-")
      for (auto wpart : split(fc, ','))
        spec.fc_widths.push_back(parse_int(wpart, "fc width"));
  } else if (style == "residual") {
    spec.style = BlockStyle::kResidual;
    spec.stem_filters = parse_int(need("stem"), "stem filters");
    for (auto stage : split(need("stages"), ',')) {
      auto f = split(stage, ':');
      if (f.size() != 3) throw FormatError("bad stage field");
      ResStage st;
      st.channels = parse_int(f[0], "stage channels");
      st.blocks = parse_int(f[1], "stage blocks");
      st.stride = parse_int(f[2], "stage stride");
      spec.stages.push_back(st);
    }
  } else {
    throw FormatError("unknown style '" + style + "'");
  }
  spec.output_size = parse_int(need("out"), "output size");
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Compiled graph
// ---------------------------------------------------------------------------

enum class Op {
  kInput,
  kConv,
  kRelu,
  kMaxPool,
  kGlobalAvgPool,
  kFlatten,
  kConcat,
  kAdd,
  kDense,
};

struct ParamInfo {
  std::string name;
  std::vector<std::int64_t> shape;
  std::int64_t fan_in = 0;
  bool is_weight = false;  // weights get fan-in-scaled noise, biases zero
};

struct Node {
  Op op = Op::kInput;
  int in0 = -1, in1 = -1;
  std::int64_t kernel = 0, stride = 0, pad = 0;  // conv / pool
  int wparam = -1;  // weight param index; bias is wparam + 1
  std::int64_t c = 0, h = 0, w = 0;  // per-sample output shape
  std::int64_t numel() const { return c * h * w; }
};

class Graph {
 public:
  explicit Graph(const ModelSpec& spec) : spec_(spec) {
    spec_.validate();
    build();
  }

  const ModelSpec& spec() const { return spec_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<ParamInfo>& params() const { return params_; }
  int output_node() const { return static_cast<int>(nodes_.size()) - 1; }

  // Index of the weight of the last fully connected layer; the structural
  // "final layer" used by the transfer operations.
  int final_dense_weight() const { return final_dense_weight_; }

  std::int64_t total_parameters() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += TensorT<float>::numel_of(p.shape);
    return n;
  }

  int param_index(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i].name == name) return static_cast<int>(i);
    return -1;
  }

  // Fresh parameter tensors: fan-in-scaled uniform noise for weights, zeros
  // for biases, drawn in table order from one stream.
  template <typename T>
  std::vector<TensorT<T>> init_params(std::uint64_t seed) const {
    Rng rng(seed);
    std::vector<TensorT<T>> values;
    values.reserve(params_.size());
    for (const auto& p : params_) {
      TensorT<T> t(p.shape);
      if (p.is_weight) {
        const double bound = std::sqrt(3.0 / static_cast<double>(p.fan_in));
        for (auto& v : t.data)
          v = static_cast<T>(rng.uniform(-bound, bound));
      }
      values.push_back(std::move(t));
    }
    return values;
  }

 private:
  int add_node(Node n) {
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  int add_param(const std::string& name, std::vector<std::int64_t> shape,
                std::int64_t fan_in, bool weight) {
    params_.push_back({name, std::move(shape), fan_in, weight});
    return static_cast<int>(params_.size()) - 1;
  }

  int add_conv(int in, const std::string& name, std::int64_t filters,
               std::int64_t kernel, std::int64_t stride, std::int64_t pad) {
    const Node& src = nodes_[in];
    Node n;
    n.op = Op::kConv;
    n.in0 = in;
    n.kernel = kernel;
    n.stride = stride;
    n.pad = pad;
    n.c = filters;
    n.h = (src.h + 2 * pad - kernel) / stride + 1;
    n.w = (src.w + 2 * pad - kernel) / stride + 1;
    if (n.h < 1 || n.w < 1)
      throw ValidationError("conv '" + name + "' shrinks input below 1x1");
    const std::int64_t fan_in = src.c * kernel * kernel;
    n.wparam = add_param(name + ".weight", {filters, src.c, kernel, kernel},
                         fan_in, true);
    add_param(name + ".bias", {filters}, fan_in, false);
    return add_node(n);
  }

  int add_relu(int in) {
    Node n;
    n.op = Op::kRelu;
    n.in0 = in;
    n.c = nodes_[in].c;
    n.h = nodes_[in].h;
    n.w = nodes_[in].w;
    return add_node(n);
  }

  int add_pool(int in, std::int64_t size, std::int64_t stride) {
    const Node& src = nodes_[in];
    Node n;
    n.op = Op::kMaxPool;
    n.in0 = in;
    n.kernel = size;
    n.stride = stride;
    n.c = src.c;
    n.h = (src.h - size) / stride + 1;
    n.w = (src.w - size) / stride + 1;
    if (n.h < 1 || n.w < 1)
      throw ValidationError("pooling shrinks input below 1x1");
    return add_node(n);
  }

  int add_dense(int in, const std::string& name, std::int64_t width) {
    const Node& src = nodes_[in];
    Node n;
    n.op = Op::kDense;
    n.in0 = in;
    n.c = width;
    n.h = n.w = 1;
    const std::int64_t fan_in = src.numel();
    n.wparam = add_param(name + ".weight", {width, fan_in}, fan_in, true);
    add_param(name + ".bias", {width}, fan_in, false);
    int id = add_node(n);
    final_dense_weight_ = nodes_[id].wparam;
    return id;
  }

  // One trunk (conv stack or residual trunk) ending in a flat feature node.
  int build_trunk(int input_node, const std::string& prefix) {
    int cur = input_node;
    if (spec_.style == BlockStyle::kPlain) {
      int idx = 1;
      for (const auto& b : spec_.conv_blocks) {
        cur = add_conv(cur, prefix + "conv" + std::to_string(idx), b.filters,
                       b.kernel, b.stride, b.pad);
        cur = add_relu(cur);
        if (b.pool_size > 0) cur = add_pool(cur, b.pool_size, b.pool_stride);
        ++idx;
      }
      Node fl;
      fl.op = Op::kFlatten;
      fl.in0 = cur;
      fl.c = nodes_[cur].numel();
      fl.h = fl.w = 1;
      return add_node(fl);
    }
    // residual trunk
    cur = add_conv(cur, prefix + "stem", spec_.stem_filters, 3, 1, 1);
    cur = add_relu(cur);
    for (std::size_t si = 0; si < spec_.stages.size(); ++si) {
      const auto& st = spec_.stages[si];
      for (std::int64_t bi = 0; bi < st.blocks; ++bi) {
        const std::string base = prefix + "s" + std::to_string(si + 1) + "b" +
                                 std::to_string(bi + 1) + ".";
        const std::int64_t stride = bi == 0 ? st.stride : 1;
        int skip = cur;
        if (nodes_[cur].c != st.channels || stride != 1)
          skip = add_conv(cur, base + "proj", st.channels, 1, stride, 0);
        int main = add_conv(cur, base + "conv1", st.channels, 3, stride, 1);
        main = add_relu(main);
        main = add_conv(main, base + "conv2", st.channels, 3, 1, 1);
        Node addn;
        addn.op = Op::kAdd;
        addn.in0 = main;
        addn.in1 = skip;
        addn.c = nodes_[main].c;
        addn.h = nodes_[main].h;
        addn.w = nodes_[main].w;
        cur = add_node(addn);
        cur = add_relu(cur);
      }
    }
    Node gap;
    gap.op = Op::kGlobalAvgPool;
    gap.in0 = cur;
    gap.c = nodes_[cur].c;
    gap.h = gap.w = 1;
    return add_node(gap);
  }

  void build() {
    Node in0;
    in0.op = Op::kInput;
    in0.c = spec_.input.channels;
    in0.h = spec_.input.height;
    in0.w = spec_.input.width;
    int head_in;
    if (spec_.input.streams == 2) {
      int a = add_node(in0);
      int ta = build_trunk(a, "stream0.");
      Node in1 = in0;
      int b = add_node(in1);
      int tb = build_trunk(b, "stream1.");
      Node cc;
      cc.op = Op::kConcat;
      cc.in0 = ta;
      cc.in1 = tb;
      cc.c = nodes_[ta].c + nodes_[tb].c;
      cc.h = cc.w = 1;
      head_in = add_node(cc);
    } else {
      int a = add_node(in0);
      head_in = build_trunk(a, "");
    }
    int cur = head_in;
    int idx = 1;
    if (spec_.style == BlockStyle::kPlain) {
      for (auto fcw : spec_.fc_widths) {
        cur = add_dense(cur, "fc" + std::to_string(idx), fcw);
        cur = add_relu(cur);
        ++idx;
      }
      add_dense(cur, "fc" + std::to_string(idx), spec_.output_size);
    } else {
      add_dense(cur, "head", spec_.output_size);
    }
  }

  ModelSpec spec_;
  std::vector<Node> nodes_;
  std::vector<ParamInfo> params_;
  int final_dense_weight_ = -1;
};

// ---------------------------------------------------------------------------
// Checkpoint: spec + named parameters + training metadata
// ---------------------------------------------------------------------------

struct Checkpoint {
  ModelSpec spec;
  std::vector<Tensor> params;  // graph table order, float32
  std::uint64_t seed = 0;
  std::int64_t epochs = 0;
  std::vector<std::string> labels;  // vocabulary the model was trained on

  void validate() const {
    Graph g(spec);
    if (params.size() != g.params().size())
      throw ValidationError("checkpoint parameter count does not match spec");
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i].shape != g.params()[i].shape)
        throw ValidationError("checkpoint shape mismatch on '" +
                              g.params()[i].name + "'");
  }

  static Checkpoint fresh(const ModelSpec& spec, std::uint64_t seed) {
    Checkpoint c;
    c.spec = spec;
    c.seed = seed;
    c.params = Graph(spec).init_params<float>(seed);
    return c;
  }
};

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

template <typename T>
struct BatchT {
  TensorT<T> x0;  // [n, c, h, w] flattened
  TensorT<T> x1;  // second stream; empty unless streams == 2
  std::int64_t n = 0;
};

using Batch = BatchT<float>;

template <typename T>
struct Workspace {
  std::vector<TensorT<T>> acts;
  std::vector<TensorT<T>> grads;
  std::vector<std::vector<std::int32_t>> argmax;  // per maxpool node
  std::vector<T> col;                             // shared im2col buffer
  std::int64_t n = 0;
};

template <typename T>
class Network {
 public:
  explicit Network(const ModelSpec& spec) : graph_(spec) {}
  explicit Network(const Graph& g) : graph_(g) {}

  const Graph& graph() const { return graph_; }
  const ModelSpec& spec() const { return graph_.spec(); }

  // Forward pass to logits. Activations stay in the workspace for backward.
  const TensorT<T>& forward(const std::vector<TensorT<T>>& params,
                            const BatchT<T>& batch, Workspace<T>& ws) const {
    const auto& nodes = graph_.nodes();
    ensure(ws, batch.n);
    int input_seen = 0;
    for (std::size_t ni = 0; ni < nodes.size(); ++ni) {
      const Node& node = nodes[ni];
      TensorT<T>& out = ws.acts[ni];
      switch (node.op) {
        case Op::kInput: {
          const TensorT<T>& src = input_seen == 0 ? batch.x0 : batch.x1;
          ++input_seen;
          if (src.numel() != batch.n * node.numel())
            throw ValidationError("input batch does not match model input");
          out.data = src.data;
          break;
        }
        case Op::kConv:
          conv_forward(node, params, ws, batch.n, ni);
          break;
        case Op::kRelu: {
          const auto& src = ws.acts[node.in0];
          for (std::size_t i = 0; i < src.data.size(); ++i)
            out.data[i] = src.data[i] > T(0) ? src.data[i] : T(0);
          break;
        }
        case Op::kMaxPool:
          pool_forward(node, ws, batch.n, ni);
          break;
        case Op::kGlobalAvgPool: {
          const Node& src = nodes[node.in0];
          const auto& a = ws.acts[node.in0];
          const std::int64_t hw = src.h * src.w;
          for (std::int64_t s = 0; s < batch.n; ++s)
            for (std::int64_t c = 0; c < src.c; ++c) {
              const T* p = a.data.data() + (s * src.c + c) * hw;
              T acc = T(0);
              for (std::int64_t i = 0; i < hw; ++i) acc += p[i];
              out.data[s * src.c + c] = acc / static_cast<T>(hw);
            }
          break;
        }
        case Op::kFlatten:
          out.data = ws.acts[node.in0].data;
          break;
        case Op::kConcat: {
          const auto& a = ws.acts[node.in0];
          const auto& b = ws.acts[node.in1];
          const std::int64_t ca = nodes[node.in0].numel();
          const std::int64_t cb = nodes[node.in1].numel();
          for (std::int64_t s = 0; s < batch.n; ++s) {
            std::copy_n(a.data.data() + s * ca, ca,
                        out.data.data() + s * (ca + cb));
            std::copy_n(b.data.data() + s * cb, cb,
                        out.data.data() + s * (ca + cb) + ca);
          }
          break;
        }
        case Op::kAdd: {
          const auto& a = ws.acts[node.in0];
          const auto& b = ws.acts[node.in1];
          for (std::size_t i = 0; i < out.data.size(); ++i)
            out.data[i] = a.data[i] + b.data[i];
          break;
        }
        case Op::kDense: {
          const auto& x = ws.acts[node.in0];
          const auto& wt = params[node.wparam];
          const auto& bias = params[node.wparam + 1];
          const std::int64_t in_dim = nodes[node.in0].numel();
          const std::int64_t out_dim = node.c;
          out.fill(T(0));
          matmul_abt_acc(out.data.data(), x.data.data(), wt.data.data(),
                         batch.n, in_dim, out_dim);
          for (std::int64_t s = 0; s < batch.n; ++s)
            for (std::int64_t o = 0; o < out_dim; ++o)
              out.data[s * out_dim + o] += bias.data[o];
          break;
        }
      }
    }
    return ws.acts.back();
  }

  // Backward from d(loss)/d(logits); parameter gradients are accumulated
  // into `grads` (caller zeroes them between batches).
  void backward(const std::vector<TensorT<T>>& params, Workspace<T>& ws,
                const TensorT<T>& dlogits,
                std::vector<TensorT<T>>& grads) const {
    const auto& nodes = graph_.nodes();
    for (std::size_t ni = 0; ni < nodes.size(); ++ni) ws.grads[ni].fill(T(0));
    ws.grads.back().data = dlogits.data;
    for (std::size_t ri = nodes.size(); ri-- > 0;) {
      const Node& node = nodes[ri];
      const TensorT<T>& gout = ws.grads[ri];
      switch (node.op) {
        case Op::kInput:
          break;
        case Op::kConv:
          conv_backward(node, params, ws, grads, ri);
          break;
        case Op::kRelu: {
          const auto& y = ws.acts[ri];
          auto& gin = ws.grads[node.in0];
          for (std::size_t i = 0; i < y.data.size(); ++i)
            if (y.data[i] > T(0)) gin.data[i] += gout.data[i];
          break;
        }
        case Op::kMaxPool: {
          auto& gin = ws.grads[node.in0];
          const auto& idx = ws.argmax[ri];
          for (std::size_t i = 0; i < gout.data.size(); ++i)
            gin.data[idx[i]] += gout.data[i];
          break;
        }
        case Op::kGlobalAvgPool: {
          const Node& src = nodes[node.in0];
          auto& gin = ws.grads[node.in0];
          const std::int64_t hw = src.h * src.w;
          const T inv = T(1) / static_cast<T>(hw);
          for (std::int64_t s = 0; s < ws.n; ++s)
            for (std::int64_t c = 0; c < src.c; ++c) {
              const T g = gout.data[s * src.c + c] * inv;
              T* p = gin.data.data() + (s * src.c + c) * hw;
              for (std::int64_t i = 0; i < hw; ++i) p[i] += g;
            }
          break;
        }
        case Op::kFlatten: {
          auto& gin = ws.grads[node.in0];
          for (std::size_t i = 0; i < gout.data.size(); ++i)
            gin.data[i] += gout.data[i];
          break;
        }
        case Op::kConcat: {
          auto& ga = ws.grads[node.in0];
          auto& gb = ws.grads[node.in1];
          const std::int64_t ca = nodes[node.in0].numel();
          const std::int64_t cb = nodes[node.in1].numel();
          for (std::int64_t s = 0; s < ws.n; ++s) {
            const T* g = gout.data.data() + s * (ca + cb);
            for (std::int64_t i = 0; i < ca; ++i) ga.data[s * ca + i] += g[i];
            for (std::int64_t i = 0; i < cb; ++i)
              gb.data[s * cb + i] += g[ca + i];
          }
          break;
        }
        case Op::kAdd: {
          auto& ga = ws.grads[node.in0];
          auto& gb = ws.grads[node.in1];
          for (std::size_t i = 0; i < gout.data.size(); ++i) {
            ga.data[i] += gout.data[i];
            gb.data[i] += gout.data[i];
          }
          break;
        }
        case Op::kDense: {
          const auto& x = ws.acts[node.in0];
          const auto& wt = params[node.wparam];
          auto& gw = grads[node.wparam];
          auto& gb = grads[node.wparam + 1];
          auto& gin = ws.grads[node.in0];
          const std::int64_t in_dim = nodes[node.in0].numel();
          const std::int64_t out_dim = node.c;
          // gW[o,i] += sum_s gout[s,o] * x[s,i]
          matmul_atb_acc(gw.data.data(), gout.data.data(), x.data.data(),
                         ws.n, out_dim, in_dim);
          for (std::int64_t s = 0; s < ws.n; ++s)
            for (std::int64_t o = 0; o < out_dim; ++o)
              gb.data[o] += gout.data[s * out_dim + o];
          // gin[s,i] += sum_o gout[s,o] * W[o,i]
          matmul_acc(gin.data.data(), gout.data.data(), wt.data.data(), ws.n,
                     out_dim, in_dim);
          break;
        }
      }
    }
  }

 private:
  void ensure(Workspace<T>& ws, std::int64_t n) const {
    const auto& nodes = graph_.nodes();
    if (ws.n == n && ws.acts.size() == nodes.size()) return;
    ws.n = n;
    ws.acts.assign(nodes.size(), {});
    ws.grads.assign(nodes.size(), {});
    ws.argmax.assign(nodes.size(), {});
    std::int64_t max_col = 1;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Node& node = nodes[i];
      ws.acts[i] = TensorT<T>({n, std::max<std::int64_t>(node.numel(), 1)});
      ws.grads[i] = TensorT<T>({n, std::max<std::int64_t>(node.numel(), 1)});
      if (node.op == Op::kMaxPool)
        ws.argmax[i].assign(static_cast<std::size_t>(n * node.numel()), 0);
      if (node.op == Op::kConv) {
        const Node& src = nodes[node.in0];
        max_col = std::max(max_col, src.c * node.kernel * node.kernel *
                                        node.h * node.w);
      }
    }
    ws.col.assign(static_cast<std::size_t>(max_col), T(0));
  }

  void conv_forward(const Node& node, const std::vector<TensorT<T>>& params,
                    Workspace<T>& ws, std::int64_t n, std::size_t ni) const {
    const Node& src = graph_.nodes()[node.in0];
    const auto& x = ws.acts[node.in0];
    const auto& wt = params[node.wparam];
    const auto& bias = params[node.wparam + 1];
    auto& out = ws.acts[ni];
    const std::int64_t k = src.c * node.kernel * node.kernel;
    const std::int64_t ohw = node.h * node.w;
    for (std::int64_t s = 0; s < n; ++s) {
      im2col(x.data.data() + s * src.numel(), src.c, src.h, src.w, node.kernel,
             node.stride, node.pad, node.h, node.w, ws.col.data());
      T* o = out.data.data() + s * node.numel();
      for (std::int64_t f = 0; f < node.c; ++f)
        std::fill_n(o + f * ohw, ohw, bias.data[f]);
      matmul_acc(o, wt.data.data(), ws.col.data(), node.c, k, ohw);
    }
  }

  void conv_backward(const Node& node, const std::vector<TensorT<T>>& params,
                     Workspace<T>& ws, std::vector<TensorT<T>>& grads,
                     std::size_t ni) const {
    const Node& src = graph_.nodes()[node.in0];
    const auto& x = ws.acts[node.in0];
    const auto& wt = params[node.wparam];
    const auto& gout = ws.grads[ni];
    auto& gw = grads[node.wparam];
    auto& gb = grads[node.wparam + 1];
    auto& gin = ws.grads[node.in0];
    const std::int64_t k = src.c * node.kernel * node.kernel;
    const std::int64_t ohw = node.h * node.w;
    std::vector<T> gcol(static_cast<std::size_t>(k * ohw));
    for (std::int64_t s = 0; s < ws.n; ++s) {
      const T* go = gout.data.data() + s * node.numel();
      im2col(x.data.data() + s * src.numel(), src.c, src.h, src.w, node.kernel,
             node.stride, node.pad, node.h, node.w, ws.col.data());
      // gW[f,k] += gout[f,:] . col[k,:]
      matmul_abt_acc(gw.data.data(), go, ws.col.data(), node.c, ohw, k);
      for (std::int64_t f = 0; f < node.c; ++f) {
        T acc = T(0);
        for (std::int64_t i = 0; i < ohw; ++i) acc += go[f * ohw + i];
        gb.data[f] += acc;
      }
      // gcol = W^T * gout, then scatter back to the input image
      std::fill(gcol.begin(), gcol.end(), T(0));
      matmul_atb_acc(gcol.data(), wt.data.data(), go, node.c, k, ohw);
      col2im_acc(gcol.data(), src.c, src.h, src.w, node.kernel, node.stride,
                 node.pad, node.h, node.w,
                 gin.data.data() + s * src.numel());
    }
  }

  void pool_forward(const Node& node, Workspace<T>& ws, std::int64_t n,
                    std::size_t ni) const {
    const Node& src = graph_.nodes()[node.in0];
    const auto& x = ws.acts[node.in0];
    auto& out = ws.acts[ni];
    auto& idx = ws.argmax[ni];
    for (std::int64_t s = 0; s < n; ++s) {
      const T* xi = x.data.data() + s * src.numel();
      T* o = out.data.data() + s * node.numel();
      std::int32_t* ix = idx.data() + s * node.numel();
      std::int64_t oi = 0;
      for (std::int64_t c = 0; c < src.c; ++c)
        for (std::int64_t oy = 0; oy < node.h; ++oy)
          for (std::int64_t ox = 0; ox < node.w; ++ox, ++oi) {
            T best{};
            std::int64_t best_at = -1;
            for (std::int64_t ky = 0; ky < node.kernel; ++ky)
              for (std::int64_t kx = 0; kx < node.kernel; ++kx) {
                const std::int64_t sy = oy * node.stride + ky;
                const std::int64_t sx = ox * node.stride + kx;
                const std::int64_t at = (c * src.h + sy) * src.w + sx;
                if (best_at < 0 || xi[at] > best) {
                  best = xi[at];
                  best_at = at;
                }
              }
            o[oi] = best;
            // offset within the whole batch tensor for the backward scatter
            ix[oi] = static_cast<std::int32_t>(s * src.numel() + best_at);
          }
    }
  }

  Graph graph_;
};

// Head activations. Event mode: elementwise logistic map onto (0,1), so the
// 0.5 decode threshold is meaningful. Activity mode: softmax distribution.
template <typename T>
void apply_output_activation(const ModelSpec& spec, TensorT<T>& logits) {
  const std::int64_t e = spec.output_size;
  const std::int64_t n = logits.numel() / e;
  if (spec.output_activation == OutputActivation::kSigmoid) {
    for (auto& v : logits.data) v = T(1) / (T(1) + std::exp(-v));
    return;
  }
  for (std::int64_t s = 0; s < n; ++s) {
    T* row = logits.data.data() + s * e;
    T mx = row[0];
    for (std::int64_t i = 1; i < e; ++i) mx = std::max(mx, row[i]);
    T sum = T(0);
    for (std::int64_t i = 0; i < e; ++i) {
      row[i] = std::exp(row[i] - mx);
      sum += row[i];
    }
    for (std::int64_t i = 0; i < e; ++i) row[i] /= sum;
  }
}

// Inference entry point: batch in, per-sample activated output vectors out.
inline std::vector<std::vector<double>> forward(const Checkpoint& ckpt,
                                                const Batch& batch) {
  ckpt.validate();
  Network<float> net(ckpt.spec);
  Workspace<float> ws;
  TensorT<float> logits = net.forward(ckpt.params, batch, ws);
  apply_output_activation(ckpt.spec, logits);
  const std::int64_t e = ckpt.spec.output_size;
  std::vector<std::vector<double>> out(static_cast<std::size_t>(batch.n));
  for (std::int64_t s = 0; s < batch.n; ++s) {
    out[s].resize(static_cast<std::size_t>(e));
    for (std::int64_t i = 0; i < e; ++i)
      out[s][i] = static_cast<double>(logits.data[s * e + i]);
  }
  return out;
}

}  // namespace pixlog
