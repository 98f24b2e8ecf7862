#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dewarp/checkpoint.hpp"
#include "dewarp/config.hpp"
#include "dewarp/layers.hpp"
#include "dewarp/ops.hpp"

namespace dewarp {

// Gated bifurcated stacked U-Net configuration. At scale 1 / input 256 the
// tensor sizes land exactly on the published architecture; scale multiplies
// every internal width (floor at 1 channel).
struct ModelConfig {
  int input_size = 256;
  int base_channels = 32;   // width of the initial conv output X
  int gated_channels = 16;  // width of the gated stream / Go
  double scale = 1.0;
  bool gate_enabled = true;
  bool bifurcated = true;
  bool decoder_shared_weights = false;

  int scaled(int c) const {
    const int v = static_cast<int>(std::llround(c * scale));
    return v < 1 ? 1 : v;
  }

  void validate() const {
    if (input_size < 32 || input_size % 32 != 0)
      throw UsageError("ModelConfig: input_size must be a positive multiple of 32, got " +
                       std::to_string(input_size));
    if (base_channels < 1 || gated_channels < 1)
      throw UsageError("ModelConfig: channel widths must be >= 1");
    if (scale <= 0.0) throw UsageError("ModelConfig: scale must be > 0");
    if (decoder_shared_weights && !bifurcated)
      throw UsageError("ModelConfig: decoder_shared_weights requires bifurcated");
  }

  KeyValueConfig to_config(const std::string& prefix = "model.") const {
    KeyValueConfig kv;
    kv.set_int(prefix + "input_size", input_size);
    kv.set_int(prefix + "base_channels", base_channels);
    kv.set_int(prefix + "gated_channels", gated_channels);
    kv.set_double(prefix + "scale", scale);
    kv.set_bool(prefix + "gate_enabled", gate_enabled);
    kv.set_bool(prefix + "bifurcated", bifurcated);
    kv.set_bool(prefix + "decoder_shared_weights", decoder_shared_weights);
    return kv;
  }

  static ModelConfig from_config(const KeyValueConfig& kv, const std::string& prefix = "model.") {
    ModelConfig cfg;
    cfg.input_size = static_cast<int>(kv.get_int(prefix + "input_size", cfg.input_size));
    cfg.base_channels = static_cast<int>(kv.get_int(prefix + "base_channels", cfg.base_channels));
    cfg.gated_channels =
        static_cast<int>(kv.get_int(prefix + "gated_channels", cfg.gated_channels));
    cfg.scale = kv.get_double(prefix + "scale", cfg.scale);
    cfg.gate_enabled = kv.get_bool(prefix + "gate_enabled", cfg.gate_enabled);
    cfg.bifurcated = kv.get_bool(prefix + "bifurcated", cfg.bifurcated);
    cfg.decoder_shared_weights =
        kv.get_bool(prefix + "decoder_shared_weights", cfg.decoder_shared_weights);
    cfg.validate();
    return cfg;
  }
};

struct ShapeTrace {
  std::vector<std::pair<std::string, Shape>> entries;

  void add(const std::string& name, const Shape& s) { entries.emplace_back(name, s); }
  const Shape* find(const std::string& name) const {
    for (const auto& [n, s] : entries)
      if (n == name) return &s;
    return nullptr;
  }
};

template <typename T>
struct ModelOutput {
  TensorT<T> grid;           // (n, 2, S, S), tanh range
  TensorT<T> edge_logits;    // (n, 1, S, S); undefined when the gate is disabled
  TensorT<T> edge_features;  // Go, (n, gated_channels*scale, S, S)
  ShapeTrace trace;
};

namespace model_detail {

template <typename T>
struct DoubleConv {
  Conv2dLayer<T> a, b;

  DoubleConv() = default;
  DoubleConv(int in_ch, int out_ch, Rng& rng)
      : a(in_ch, out_ch, 3, 1, rng), b(out_ch, out_ch, 3, 1, rng) {}

  TensorT<T> forward(const TensorT<T>& x) const {
    return ops::relu(b.forward(ops::relu(a.forward(x))));
  }
  void register_params(std::vector<NamedParam<T>>& out, const std::string& prefix) const {
    a.register_params(out, prefix + ".a");
    b.register_params(out, prefix + ".b");
  }
};

// one decoder step: upsample, reduce, concat the skip features, fuse
template <typename T>
struct DecoderStage {
  Conv2dLayer<T> reduce, fuse;

  DecoderStage() = default;
  DecoderStage(int in_ch, int out_ch, int skip_ch, Rng& rng)
      : reduce(in_ch, out_ch, 3, 1, rng), fuse(out_ch + skip_ch, out_ch, 3, 1, rng) {}

  TensorT<T> forward(const TensorT<T>& x, const TensorT<T>& skip) const {
    auto up = ops::upsample_bilinear2x(x);
    auto r = ops::relu(reduce.forward(up));
    auto cat = ops::concat_channels<T>({r, skip});
    return ops::relu(fuse.forward(cat));
  }
  void register_params(std::vector<NamedParam<T>>& out, const std::string& prefix) const {
    reduce.register_params(out, prefix + ".reduce");
    fuse.register_params(out, prefix + ".fuse");
  }
};

// gated convolutional layer: 1-channel sigmoid attention from the stream
// and a resized backbone feature, residual multiplicative gating, then
// conv3x3+ReLU
template <typename T>
struct GatedConvLayer {
  Conv2dLayer<T> gate;  // 1x1 over concat(stream, feature) -> 1 channel
  Conv2dLayer<T> post;  // 3x3 at stream width

  GatedConvLayer() = default;
  GatedConvLayer(int stream_ch, int feat_ch, Rng& rng)
      : gate(stream_ch + feat_ch, 1, 1, 0, rng), post(stream_ch, stream_ch, 3, 1, rng) {}

  TensorT<T> forward(const TensorT<T>& stream, const TensorT<T>& feat_resized) const {
    auto att = ops::sigmoid(gate.forward(ops::concat_channels<T>({stream, feat_resized})));
    auto gated = ops::add(ops::mul_channel_broadcast(stream, att), stream);
    return ops::relu(post.forward(gated));
  }
  void register_params(std::vector<NamedParam<T>>& out, const std::string& prefix) const {
    gate.register_params(out, prefix + ".gate");
    post.register_params(out, prefix + ".post");
  }
};

template <typename T>
TensorT<T> upsample_to(const TensorT<T>& x, int target) {
  TensorT<T> cur = x;
  while (cur.shape().h < target) cur = ops::upsample_bilinear2x(cur);
  if (cur.shape().h != target)
    throw DimensionError("upsample_to: " + std::to_string(x.shape().h) + " -> " +
                         std::to_string(target) + " is not a power-of-two ratio");
  return cur;
}

}  // namespace model_detail

// The stacked network. The primary U-Net produces decoded output O, gated
// edge features Go and initial features X, concatenated into U1; the
// secondary U-Net encodes U1, splits its bottleneck into two halves decoded
// independently (optionally with shared weights), and tanh-normalizes the
// concatenated 2-channel output into the dewarp grid.
template <typename T>
class GbsuNet {
  using DoubleConv = model_detail::DoubleConv<T>;
  using DecoderStage = model_detail::DecoderStage<T>;
  using GatedConvLayer = model_detail::GatedConvLayer<T>;

 public:
  explicit GbsuNet(const ModelConfig& cfg, std::uint64_t seed = 1) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const int c32 = cfg_.scaled(cfg_.base_channels);
    const int c16 = cfg_.scaled(cfg_.gated_channels);
    const int w1 = cfg_.scaled(cfg_.base_channels * 2);
    const int w2 = cfg_.scaled(cfg_.base_channels * 4);
    const int w3 = cfg_.scaled(cfg_.base_channels * 8);
    const int w4 = cfg_.scaled(cfg_.base_channels * 16);
    const int w5 = cfg_.scaled(cfg_.base_channels * 32);
    o_channels_ = std::max(1, static_cast<int>(std::llround(2 * cfg_.scale)));

    // --- primary U-Net ---
    p_init_ = DoubleConv(3, c32, rng);
    p_enc_[0] = DoubleConv(c32, w1, rng);
    p_enc_[1] = DoubleConv(w1, w2, rng);
    p_enc_[2] = DoubleConv(w2, w3, rng);
    p_enc_[3] = DoubleConv(w3, w4, rng);
    p_enc_[4] = DoubleConv(w4, w5, rng);
    // skip path: one conv3x3+ReLU per spatial level ("CNN path")
    const int skip_ch[5] = {w4, w3, w2, w1, c32};
    p_skip_[0] = Conv2dLayer<T>(w4, w4, 3, 1, rng);
    p_skip_[1] = Conv2dLayer<T>(w3, w3, 3, 1, rng);
    p_skip_[2] = Conv2dLayer<T>(w2, w2, 3, 1, rng);
    p_skip_[3] = Conv2dLayer<T>(w1, w1, 3, 1, rng);
    p_skip_[4] = Conv2dLayer<T>(c32, c32, 3, 1, rng);
    const int p_dec_w[5] = {w4, w3, w2, w1, c32};
    int prev = w5;
    for (int i = 0; i < 5; ++i) {
      p_dec_[i] = DecoderStage(prev, p_dec_w[i], skip_ch[i], rng);
      prev = p_dec_w[i];
    }
    p_head_ = Conv2dLayer<T>(c32, o_channels_, 3, 1, rng);

    // --- gated branch ---
    if (cfg_.gate_enabled) {
      g_init_ = Conv2dLayer<T>(w1, c16, 1, 0, rng);
      g_gcl_[0] = GatedConvLayer(c16, w3, rng);
      g_gcl_[1] = GatedConvLayer(c16, w4, rng);
      g_go_head_ = Conv2dLayer<T>(c16, c16, 1, 0, rng);
      g_edge_head_ = Conv2dLayer<T>(c16, 1, 1, 0, rng);
    }

    // --- secondary U-Net ---
    u1_channels_ = o_channels_ + c16 + c32;
    const int sb = cfg_.scaled(cfg_.base_channels * 16);  // half-bottleneck width
    s_bottleneck_ = 2 * sb;
    s_init_ = DoubleConv(u1_channels_, w1, rng);
    s_enc_[0] = DoubleConv(w1, w1, rng);
    s_enc_[1] = DoubleConv(w1, w2, rng);
    s_enc_[2] = DoubleConv(w2, w3, rng);
    s_enc_[3] = DoubleConv(w3, w4, rng);
    s_enc_[4] = DoubleConv(w4, s_bottleneck_, rng);
    s_skip_[0] = Conv2dLayer<T>(w4, w4, 3, 1, rng);
    s_skip_[1] = Conv2dLayer<T>(w3, w3, 3, 1, rng);
    s_skip_[2] = Conv2dLayer<T>(w2, w2, 3, 1, rng);
    s_skip_[3] = Conv2dLayer<T>(w1, w1, 3, 1, rng);
    s_skip_[4] = Conv2dLayer<T>(w1, w1, 3, 1, rng);
    const int s_skip_ch[5] = {w4, w3, w2, w1, w1};

    if (cfg_.bifurcated) {
      // each half runs at half the single-decoder widths
      const int d_w[5] = {cfg_.scaled(cfg_.base_channels * 8), cfg_.scaled(cfg_.base_channels * 4),
                          cfg_.scaled(cfg_.base_channels * 2), cfg_.scaled(cfg_.base_channels),
                          cfg_.scaled(std::max(1, cfg_.base_channels / 2))};
      auto build_half = [&](std::array<DecoderStage, 5>& stages, Conv2dLayer<T>& head) {
        int dprev = sb;
        for (int i = 0; i < 5; ++i) {
          stages[i] = DecoderStage(dprev, d_w[i], s_skip_ch[i], rng);
          dprev = d_w[i];
        }
        head = Conv2dLayer<T>(d_w[4], 1, 3, 1, rng);
      };
      build_half(s_dec1_, s_head1_);
      if (cfg_.decoder_shared_weights) {
        s_dec2_ = s_dec1_;  // same parameter tensors
        s_head2_ = s_head1_;
      } else {
        build_half(s_dec2_, s_head2_);
      }
    } else {
      const int d_w[5] = {w4, w3, w2, w1, c32};
      int dprev = s_bottleneck_;
      for (int i = 0; i < 5; ++i) {
        s_dec1_[i] = DecoderStage(dprev, d_w[i], s_skip_ch[i], rng);
        dprev = d_w[i];
      }
      s_head1_ = Conv2dLayer<T>(d_w[4], 2, 3, 1, rng);
    }

    collect_params();
  }

  const ModelConfig& config() const { return cfg_; }

  ModelOutput<T> forward(const TensorT<T>& input) const {
    const Shape& s = input.shape();
    const int S = cfg_.input_size;
    if (s.c != 3 || s.h != S || s.w != S)
      throw DimensionError("GbsuNet::forward: expected (n,3," + std::to_string(S) + "," +
                           std::to_string(S) + "), got " + s.str());

    ModelOutput<T> out;
    out.trace.add("I", s);

    // primary encoder
    auto X = p_init_.forward(input);
    out.trace.add("X", X.shape());
    std::array<TensorT<T>, 5> enc;  // pre-pool features of stages 1..5
    auto cur = X;
    for (int i = 0; i < 5; ++i) {
      cur = p_enc_[i].forward(ops::maxpool2x2(cur));
      enc[i] = cur;
    }
    out.trace.add("L2", enc[0].shape());
    out.trace.add("L3", enc[1].shape());
    out.trace.add("L4", enc[2].shape());
    out.trace.add("L5", enc[3].shape());
    out.trace.add("B_primary", enc[4].shape());

    // primary decoder over conv-ReLU skip features
    auto d = enc[4];
    const TensorT<T> skip_src[5] = {enc[3], enc[2], enc[1], enc[0], X};
    for (int i = 0; i < 5; ++i) {
      auto skip = ops::relu(p_skip_[i].forward(skip_src[i]));
      d = p_dec_[i].forward(d, skip);
    }
    auto O = p_head_.forward(d);
    out.trace.add("O", O.shape());

    // gated branch from the features before poolings 2, 4 and 5
    TensorT<T> Go;
    if (cfg_.gate_enabled) {
      auto stream = model_detail::upsample_to(g_init_.forward(enc[0]), S);
      stream = g_gcl_[0].forward(stream, model_detail::upsample_to(enc[2], S));
      stream = g_gcl_[1].forward(stream, model_detail::upsample_to(enc[3], S));
      Go = g_go_head_.forward(stream);
      out.edge_logits = g_edge_head_.forward(stream);
    } else {
      // keep U1's channel layout identical with the gate ablated
      Go = TensorT<T>::zeros(Shape(s.n, cfg_.scaled(cfg_.gated_channels), S, S));
    }
    out.edge_features = Go;
    out.trace.add("Go", Go.shape());

    auto U1 = ops::concat_channels<T>({O, Go, X});
    out.trace.add("U1", U1.shape());

    // secondary encoder
    auto S0 = s_init_.forward(U1);
    std::array<TensorT<T>, 5> senc;
    cur = S0;
    for (int i = 0; i < 5; ++i) {
      cur = s_enc_[i].forward(ops::maxpool2x2(cur));
      senc[i] = cur;
    }
    out.trace.add("B", senc[4].shape());

    const TensorT<T> s_skip_src[5] = {senc[3], senc[2], senc[1], senc[0], S0};
    std::array<TensorT<T>, 5> sskip;
    for (int i = 0; i < 5; ++i) sskip[i] = ops::relu(s_skip_[i].forward(s_skip_src[i]));

    TensorT<T> grid_linear;
    if (cfg_.bifurcated) {
      const int half = s_bottleneck_ / 2;
      auto halves = ops::split_channels(senc[4], {half, half});
      out.trace.add("B1", halves[0].shape());
      out.trace.add("B2", halves[1].shape());
      auto run_half = [&](const std::array<DecoderStage, 5>& stages, const Conv2dLayer<T>& head,
                          const TensorT<T>& bottom) {
        auto h = bottom;
        for (int i = 0; i < 5; ++i) h = stages[i].forward(h, sskip[i]);
        return head.forward(h);
      };
      auto O1 = run_half(s_dec1_, s_head1_, halves[0]);
      auto O2 = run_half(s_dec2_, s_head2_, halves[1]);
      out.trace.add("O1", O1.shape());
      out.trace.add("O2", O2.shape());
      grid_linear = ops::concat_channels<T>({O1, O2});
    } else {
      auto h = senc[4];
      for (int i = 0; i < 5; ++i) h = s_dec1_[i].forward(h, sskip[i]);
      grid_linear = s_head1_.forward(h);
    }
    out.grid = ops::tanh(grid_linear);
    out.trace.add("g", out.grid.shape());
    return out;
  }

  std::vector<NamedParam<T>>& params() { return params_; }
  const std::vector<NamedParam<T>>& params() const { return params_; }

  std::size_t param_count() const { return count_params(params_); }
  std::size_t param_count(const std::string& prefix) const {
    return count_params_with_prefix(params_, prefix);
  }

  std::string summary() const {
    std::ostringstream ss;
    ss << "gbsu-net input=" << cfg_.input_size << " scale=" << cfg_.scale
       << " gate=" << (cfg_.gate_enabled ? "on" : "off")
       << " bifurcated=" << (cfg_.bifurcated ? "yes" : "no")
       << " shared_decoders=" << (cfg_.decoder_shared_weights ? "yes" : "no") << "\n";
    ss << "  primary:   " << param_count("primary.") << " params\n";
    ss << "  gated:     " << param_count("gated.") << " params\n";
    ss << "  secondary: " << param_count("secondary.") << " params (decoders "
       << param_count("secondary.dec") << ")\n";
    ss << "  total:     " << param_count() << " params\n";
    return ss.str();
  }

  void save(const std::string& path) const {
    write_checkpoint(path, snapshot_params(params_));
    cfg_.to_config().save(path + ".cfg");
  }

  static GbsuNet load(const std::string& path) {
    const ModelConfig cfg = ModelConfig::from_config(KeyValueConfig::load(path + ".cfg"));
    GbsuNet net(cfg, 0);
    auto records = read_checkpoint(path);
    load_params(net.params_, records);
    return net;
  }

 private:
  void collect_params() {
    params_.clear();
    p_init_.register_params(params_, "primary.init");
    for (int i = 0; i < 5; ++i)
      p_enc_[i].register_params(params_, "primary.enc" + std::to_string(i + 1));
    for (int i = 0; i < 5; ++i)
      p_skip_[i].register_params(params_, "primary.skip" + std::to_string(i + 1));
    for (int i = 0; i < 5; ++i)
      p_dec_[i].register_params(params_, "primary.dec" + std::to_string(i + 1));
    p_head_.register_params(params_, "primary.head");
    if (cfg_.gate_enabled) {
      g_init_.register_params(params_, "gated.init");
      g_gcl_[0].register_params(params_, "gated.gcl1");
      g_gcl_[1].register_params(params_, "gated.gcl2");
      g_go_head_.register_params(params_, "gated.go_head");
      g_edge_head_.register_params(params_, "gated.edge_head");
    }
    s_init_.register_params(params_, "secondary.init");
    for (int i = 0; i < 5; ++i)
      s_enc_[i].register_params(params_, "secondary.enc" + std::to_string(i + 1));
    for (int i = 0; i < 5; ++i)
      s_skip_[i].register_params(params_, "secondary.skip" + std::to_string(i + 1));
    for (int i = 0; i < 5; ++i)
      s_dec1_[i].register_params(params_, "secondary.dec1.stage" + std::to_string(i + 1));
    s_head1_.register_params(params_, "secondary.dec1.head");
    if (cfg_.bifurcated && !cfg_.decoder_shared_weights) {
      for (int i = 0; i < 5; ++i)
        s_dec2_[i].register_params(params_, "secondary.dec2.stage" + std::to_string(i + 1));
      s_head2_.register_params(params_, "secondary.dec2.head");
    }
  }

  ModelConfig cfg_;
  int o_channels_ = 2;
  int u1_channels_ = 50;
  int s_bottleneck_ = 1024;

  DoubleConv p_init_;
  std::array<DoubleConv, 5> p_enc_;
  std::array<Conv2dLayer<T>, 5> p_skip_;
  std::array<DecoderStage, 5> p_dec_;
  Conv2dLayer<T> p_head_;

  Conv2dLayer<T> g_init_;
  std::array<GatedConvLayer, 2> g_gcl_;
  Conv2dLayer<T> g_go_head_;
  Conv2dLayer<T> g_edge_head_;

  DoubleConv s_init_;
  std::array<DoubleConv, 5> s_enc_;
  std::array<Conv2dLayer<T>, 5> s_skip_;
  std::array<DecoderStage, 5> s_dec1_, s_dec2_;
  Conv2dLayer<T> s_head1_, s_head2_;

  std::vector<NamedParam<T>> params_;
};

extern template class GbsuNet<float>;
extern template class GbsuNet<double>;

}  // namespace dewarp
