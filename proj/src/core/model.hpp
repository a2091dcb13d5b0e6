#pragma once

#include <deque>

#include "core/gru.hpp"
#include "core/param.hpp"

namespace lc {

enum class CounterOrder { horizontal_first, vertical_first };
enum class MonotonePlacement { before_decoder, after_decoder, none };

const char* counter_order_name(CounterOrder o);
CounterOrder counter_order_from_name(const std::string& s);
const char* placement_name(MonotonePlacement p);
MonotonePlacement placement_from_name(const std::string& s);

// Defaults encode the winning configuration: horizontal-first bidirectional
// counter, hard_sigmoid+cumsum at the last counter conv.
struct ModelConfig {
  std::vector<int> encoder_channels{16, 32, 64};
  int counter_hidden = 64;
  CounterOrder counter_order = CounterOrder::horizontal_first;
  bool counter_bidi_first = true;
  bool counter_bidi_second = true;
  MonotonePlacement monotone_placement = MonotonePlacement::before_decoder;
  Act monotone_preactivation = Act::hard_sigmoid;
  int input_h = 192;
  int input_w = 128;
  int kernel_size = 3;

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  bool operator==(const ModelConfig&) const = default;
};

// Encoder -> Counter -> Decoder counting network. Forward maps [B,1,H,W]
// to a per-pixel line count of the same extent.
template <typename T>
class LineCounterNet {
 public:
  LineCounterNet(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng = Rng::seeded(seed);
    int k = cfg_.kernel_size;
    int in_ch = 1;
    for (size_t i = 0; i < cfg_.encoder_channels.size(); ++i) {
      int ch = cfg_.encoder_channels[i];
      std::string base = "encoder.s" + std::to_string(i);
      conv_blocks_.push_back(make_conv(base + ".conv", in_ch, ch, k, 1, BlockTail::bn_relu, rng));
      conv_blocks_.push_back(make_conv(base + ".down", ch, ch, k, 2, BlockTail::bn_relu, rng));
      in_ch = ch;
    }
    encoder_blocks_ = conv_blocks_.size();

    int deep = cfg_.encoder_channels.back();
    conv_blocks_.push_back(make_conv("counter.conv_in", deep, cfg_.counter_hidden, k, 1, BlockTail::bn_relu, rng));
    bool first_horiz = cfg_.counter_order == CounterOrder::horizontal_first;
    gru1_ = make_gru(first_horiz ? "counter.gru_h" : "counter.gru_v",
                     first_horiz ? GruAxis::horizontal : GruAxis::vertical,
                     cfg_.counter_bidi_first, cfg_.counter_hidden, cfg_.counter_hidden, rng);
    int g1_out = cfg_.counter_hidden * (cfg_.counter_bidi_first ? 2 : 1);
    conv_blocks_.push_back(make_conv("counter.conv_mid", g1_out, cfg_.counter_hidden, k, 1, BlockTail::bn_relu, rng));
    gru2_ = make_gru(first_horiz ? "counter.gru_v" : "counter.gru_h",
                     first_horiz ? GruAxis::vertical : GruAxis::horizontal,
                     cfg_.counter_bidi_second, cfg_.counter_hidden, cfg_.counter_hidden, rng);
    int g2_out = cfg_.counter_hidden * (cfg_.counter_bidi_second ? 2 : 1);
    BlockTail out_tail = cfg_.monotone_placement == MonotonePlacement::before_decoder
                             ? BlockTail::monotone
                             : BlockTail::bn_relu;
    conv_blocks_.push_back(make_conv("counter.conv_out", g2_out, deep, k, 1, out_tail, rng));

    int stages = static_cast<int>(cfg_.encoder_channels.size());
    int ch = deep;
    for (int i = 0; i < stages; ++i) {
      int out = i + 1 < stages ? cfg_.encoder_channels[static_cast<size_t>(stages - 2 - i)] : 1;
      bool last = i + 1 == stages;
      BlockTail tail = (last && cfg_.monotone_placement == MonotonePlacement::after_decoder)
                           ? BlockTail::monotone
                           : BlockTail::bn_relu;
      auto blk = make_conv("decoder.s" + std::to_string(i) + ".conv", ch, out, k, 1, tail, rng);
      blk.upsample_first = true;
      conv_blocks_.push_back(std::move(blk));
      ch = out;
    }
  }

  struct Trace {
    Tensor<T> monotone;  // output of the cumsum block, when the model has one
  };

  Tensor<T> forward(const Tensor<T>& x, bool train, bool update_stats = true,
                    Trace* trace = nullptr) {
    if (x.rank() != 4 || x.dim(1) != 1)
      fail(ErrCode::shape_mismatch, "forward: expected [B,1,H,W], got " + shape_str(x.shape()));
    if (x.dim(2) % (1 << cfg_.encoder_channels.size()) || x.dim(3) % (1 << cfg_.encoder_channels.size()))
      fail(ErrCode::invalid_argument, "forward: input extent " + shape_str(x.shape()) +
                                          " not divisible by the encoder stride");
    Tensor<T> h = x;
    size_t gru_after1 = encoder_blocks_ + 1;  // counter.conv_in runs first
    size_t gru_after2 = encoder_blocks_ + 2;
    for (size_t i = 0; i < conv_blocks_.size(); ++i) {
      if (i == gru_after1) h = run_gru(gru1_, h, train);
      if (i == gru_after2) h = run_gru(gru2_, h, train);
      h = run_conv(conv_blocks_[i], h, train, update_stats, trace);
    }
    return h;
  }

  std::vector<Param<T>>& params() { return params_; }
  const std::vector<Param<T>>& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.tensor.numel();
    return n;
  }

  Param<T>* find_param(const std::string& name) {
    for (auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }

  // named non-trainable state (batchnorm running statistics)
  std::vector<std::pair<std::string, std::vector<T>*>> state_buffers() {
    std::vector<std::pair<std::string, std::vector<T>*>> out;
    for (auto& b : conv_blocks_)
      if (b.tail == BlockTail::bn_relu) {
        out.emplace_back(b.label + ".bn.rmean", &b.stats->mean);
        out.emplace_back(b.label + ".bn.rvar", &b.stats->var);
      }
    return out;
  }

 private:
  enum class BlockTail { bn_relu, monotone };

  struct ConvBlock {
    std::string label;
    Tensor<T> w, b, gamma, beta;
    std::unique_ptr<BnStats<T>> stats;
    BlockTail tail = BlockTail::bn_relu;
    int stride = 1;
    bool upsample_first = false;
  };

  struct GruBlock {
    SpatialGruConfig cfg;
    GruCellParams<T> fwd, bwd;
    std::string label;
  };

  Tensor<T> add_param(const std::string& name, Tensor<T> t) {
    params_.emplace_back(name, std::move(t));
    return params_.back().tensor;
  }

  Tensor<T> conv_init(Rng& rng, int cout, int cin, int k) {
    T bound = static_cast<T>(std::sqrt(6.0 / (static_cast<double>(cin) * k * k)));
    return Tensor<T>::uniform({cout, cin, k, k}, rng, -bound, bound);
  }

  ConvBlock make_conv(const std::string& label, int cin, int cout, int k, int stride,
                      BlockTail tail, Rng& rng) {
    ConvBlock b;
    b.label = label;
    b.stride = stride;
    b.tail = tail;
    b.w = add_param(label + ".w", conv_init(rng, cout, cin, k));
    b.b = add_param(label + ".b", Tensor<T>::zeros({cout}));
    if (tail == BlockTail::bn_relu) {
      b.gamma = add_param(label + ".bn.gamma", Tensor<T>::full({cout}, T(1)));
      b.beta = add_param(label + ".bn.beta", Tensor<T>::zeros({cout}));
      b.stats = std::make_unique<BnStats<T>>(cout);
    }
    return b;
  }

  GruCellParams<T> make_gru_dir(const std::string& base, int in, int hidden, Rng& rng) {
    T wb = static_cast<T>(1.0 / std::sqrt(static_cast<double>(in)));
    T ub = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hidden)));
    GruCellParams<T> p;
    p.w_z = add_param(base + ".w_z", Tensor<T>::uniform({hidden, in}, rng, -wb, wb));
    p.w_r = add_param(base + ".w_r", Tensor<T>::uniform({hidden, in}, rng, -wb, wb));
    p.w_h = add_param(base + ".w_h", Tensor<T>::uniform({hidden, in}, rng, -wb, wb));
    p.u_z = add_param(base + ".u_z", Tensor<T>::uniform({hidden, hidden}, rng, -ub, ub));
    p.u_r = add_param(base + ".u_r", Tensor<T>::uniform({hidden, hidden}, rng, -ub, ub));
    p.u_h = add_param(base + ".u_h", Tensor<T>::uniform({hidden, hidden}, rng, -ub, ub));
    p.b_z = add_param(base + ".b_z", Tensor<T>::zeros({hidden}));
    p.b_r = add_param(base + ".b_r", Tensor<T>::zeros({hidden}));
    p.b_h = add_param(base + ".b_h", Tensor<T>::zeros({hidden}));
    return p;
  }

  GruBlock make_gru(const std::string& label, GruAxis axis, bool bidi, int in, int hidden, Rng& rng) {
    GruBlock g;
    g.label = label;
    g.cfg.axis = axis;
    g.cfg.bidirectional = bidi;
    g.cfg.hidden_channels = hidden;
    g.fwd = make_gru_dir(label + ".fwd", in, hidden, rng);
    if (bidi) g.bwd = make_gru_dir(label + ".bwd", in, hidden, rng);
    return g;
  }

  Tensor<T> run_conv(ConvBlock& blk, const Tensor<T>& in, bool train, bool update_stats,
                     Trace* trace) {
    Tensor<T> h = in;
    if (blk.upsample_first) h = upsample2x(h);
    h = conv2d(h, blk.w, blk.b, blk.stride);
    if (blk.tail == BlockTail::bn_relu) {
      h = batchnorm(h, blk.gamma, blk.beta, *blk.stats, train, T(1e-3), T(0.99), update_stats);
      h = activation(h, Act::relu);
    } else {
      h = activation(h, cfg_.monotone_preactivation);
      h = cumsum_y(h);
      if (trace) trace->monotone = h;
    }
    check_finite(h, blk.label);
    return h;
  }

  Tensor<T> run_gru(GruBlock& g, const Tensor<T>& in, bool /*train*/) {
    Tensor<T> h = spatial_gru(in, g.cfg, g.fwd, g.cfg.bidirectional ? &g.bwd : nullptr);
    check_finite(h, g.label);
    return h;
  }

  void check_finite(const Tensor<T>& t, const std::string& label) {
    if (!all_finite(t.value()))
      fail(ErrCode::numeric, "non-finite activations in layer " + label);
  }

  ModelConfig cfg_;
  std::vector<Param<T>> params_;
  std::deque<ConvBlock> conv_blocks_;
  size_t encoder_blocks_ = 0;
  GruBlock gru1_, gru2_;
};

// Eq-style masked L1: mean over masked entries of |pred - gt|. Empty mask
// yields a constant zero (no gradient); *empty_flag reports it.
template <typename T>
Tensor<T> loss_masked_l1(const Tensor<T>& pred, const std::vector<T>& gt_values,
                         const std::vector<uint8_t>& mask, bool* empty_flag = nullptr) {
  if (static_cast<int64_t>(gt_values.size()) != pred.numel() || mask.size() != gt_values.size())
    fail(ErrCode::shape_mismatch, "loss_masked_l1: gt/mask extent does not match prediction " +
                                      shape_str(pred.shape()));
  bool any = false;
  for (uint8_t m : mask)
    if (m) {
      any = true;
      break;
    }
  if (empty_flag) *empty_flag = !any;
  if (!any) return Tensor<T>::zeros({1});
  auto gt = Tensor<T>::from_data(pred.shape(), gt_values);
  return mean(abs(masked_select(sub(pred, gt), mask)));
}

}  // namespace lc
