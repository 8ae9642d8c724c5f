#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "sagn/checkpoint.hpp"
#include "sagn/nn.hpp"
#include "sagn/propagate.hpp"

namespace sagn {

// Model family: Attention is the full model; Uniform and ExpDecay replace the
// learned hop weights with fixed ones; Concat is the concatenation classifier
// (inception-style); MlpOnly classifies a single diffused feature matrix.
enum class Variant { Attention, Uniform, ExpDecay, Concat, MlpOnly };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::Attention: return "attention";
    case Variant::Uniform: return "uniform";
    case Variant::ExpDecay: return "exp_decay";
    case Variant::Concat: return "concat";
    case Variant::MlpOnly: return "mlp";
  }
  return "?";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "attention") return Variant::Attention;
  if (s == "uniform") return Variant::Uniform;
  if (s == "exp_decay") return Variant::ExpDecay;
  if (s == "concat") return Variant::Concat;
  if (s == "mlp") return Variant::MlpOnly;
  throw usage_error("unknown model variant: " + s);
}

struct SagnConfig {
  std::size_t in_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t num_classes = 0;
  int k_f = 0;
  int num_layers = 2;  // per hop encoder and post encoder
  Variant variant = Variant::Attention;
  double exp_ratio = 0.5;
  double dropout = 0.0;
  double input_dropout = 0.0;
  double attention_dropout = 0.0;
  double leaky_slope = 0.2;
  bool use_batchnorm = true;
};

// Pre-softmax attention logits are clamped here for f32 safety.
constexpr double kAttentionLogitClamp = 30.0;

// Per-hop feature blocks for a node mini-batch. MlpOnly carries a single
// block (the most-diffused matrix); other variants carry k_f + 1 blocks and
// block 0 doubles as the residual input.
template <typename Real>
struct BatchInput {
  std::vector<Matrix<Real>> hop_blocks;
  std::vector<NodeId> nodes;
};

template <typename Real>
BatchInput<Real> make_batch(const HopFeatures<Real>& hf,
                            const std::vector<NodeId>& nodes, Variant variant) {
  BatchInput<Real> b;
  b.nodes = nodes;
  if (variant == Variant::MlpOnly) {
    b.hop_blocks.push_back(hf.hops.back().take_rows(nodes));
  } else {
    b.hop_blocks.reserve(hf.hops.size());
    for (const auto& m : hf.hops) b.hop_blocks.push_back(m.take_rows(nodes));
  }
  return b;
}

template <typename Real>
class SagnModel {
 public:
  void init(const SagnConfig& cfg, std::uint64_t seed,
            const std::string& name = "base") {
    check(cfg.in_dim > 0 && cfg.hidden_dim > 0 && cfg.num_classes > 0,
          "SagnModel: dimensions must be positive");
    check(cfg.k_f >= 0, "SagnModel: k_f must be >= 0");
    cfg_ = cfg;
    name_ = name;
    const int K = cfg.k_f;

    if (cfg.variant != Variant::MlpOnly) {
      MlpConfig enc;
      enc.in_dim = cfg.in_dim;
      enc.hidden_dim = cfg.hidden_dim;
      enc.out_dim = cfg.hidden_dim;
      enc.num_layers = cfg.num_layers;
      enc.use_batchnorm = cfg.use_batchnorm;
      enc.dropout_p = cfg.dropout;
      encoders_.resize(K + 1);
      for (int k = 0; k <= K; ++k) {
        encoders_[k].init(name + ".enc" + std::to_string(k), enc, seed);
      }
    }

    MlpConfig post;
    post.hidden_dim = cfg.hidden_dim;
    post.out_dim = cfg.num_classes;
    post.num_layers = cfg.num_layers;
    post.use_batchnorm = cfg.use_batchnorm;
    post.dropout_p = cfg.dropout;
    switch (cfg.variant) {
      case Variant::Concat:
        post.in_dim = (K + 1) * cfg.hidden_dim;
        break;
      case Variant::MlpOnly:
        post.in_dim = cfg.in_dim;
        break;
      default:
        post.in_dim = cfg.hidden_dim;
    }
    post_.init(name + ".post", post, seed);

    if (cfg.variant == Variant::Attention || cfg.variant == Variant::Uniform ||
        cfg.variant == Variant::ExpDecay) {
      residual_.init(name + ".residual", cfg.in_dim, cfg.hidden_dim, false,
                     seed);
      has_residual_ = true;
    }
    if (cfg.variant == Variant::Attention) {
      attention_a_.setup(name + ".attention.a", 1, 2 * cfg.hidden_dim);
      init_uniform_fan_in(attention_a_, 2 * cfg.hidden_dim, seed);
      has_attention_ = true;
    }
  }

  const SagnConfig& config() const { return cfg_; }

  const Matrix<Real>& forward(const BatchInput<Real>& batch, Mode mode,
                              Rng& rng, int threads = 1) {
    validate_batch(batch);
    const int K = cfg_.k_f;
    const std::size_t B = batch.hop_blocks[0].rows;

    if (cfg_.variant == Variant::MlpOnly) {
      Matrix<Real> dropped;
      dropout_forward(batch.hop_blocks[0], cfg_.input_dropout, mode, rng,
                      dropped, input_mask_single_);
      logits_ = post_.forward(dropped, mode, rng, threads);
      return logits_;
    }

    // Input dropout per hop block; block 0 also feeds the residual term.
    xdrop_.resize(K + 1);
    input_mask_.resize(K + 1);
    h_.resize(K + 1);
    for (int k = 0; k <= K; ++k) {
      dropout_forward(batch.hop_blocks[k], cfg_.input_dropout, mode, rng,
                      xdrop_[k], input_mask_[k]);
      h_[k] = encoders_[k].forward(xdrop_[k], mode, rng, threads);
    }

    if (cfg_.variant == Variant::Concat) {
      concat_.resize(B, (K + 1) * cfg_.hidden_dim);
      for (std::size_t i = 0; i < B; ++i) {
        Real* o = concat_.row(i);
        for (int k = 0; k <= K; ++k) {
          const Real* hk = h_[k].row(i);
          for (std::size_t j = 0; j < cfg_.hidden_dim; ++j) {
            o[k * cfg_.hidden_dim + j] = hk[j];
          }
        }
      }
      logits_ = post_.forward(concat_, mode, rng, threads);
      return logits_;
    }

    compute_theta(B, mode, rng);

    // H_att[i] = sum_k theta[i,k] * H^(k)[i]
    h_att_.resize(B, cfg_.hidden_dim);
    for (std::size_t i = 0; i < B; ++i) {
      Real* o = h_att_.row(i);
      for (int k = 0; k <= K; ++k) {
        const Real t = theta_(i, k);
        const Real* hk = h_[k].row(i);
        for (std::size_t j = 0; j < cfg_.hidden_dim; ++j) o[j] += t * hk[j];
      }
    }

    post_in_ = h_att_;
    add_inplace(post_in_, residual_.forward(xdrop_[0], threads));
    logits_ = post_.forward(post_in_, mode, rng, threads);
    return logits_;
  }

  // Accumulates parameter gradients for the cached forward pass.
  void backward(const Matrix<Real>& dlogits, int threads = 1) {
    if (cfg_.variant == Variant::MlpOnly) {
      post_.backward(dlogits, threads);
      return;
    }
    const int K = cfg_.k_f;
    const std::size_t B = dlogits.rows;
    Matrix<Real> dpost_in = post_.backward(dlogits, threads);

    std::vector<Matrix<Real>> dh(K + 1);
    for (int k = 0; k <= K; ++k) dh[k].resize(B, cfg_.hidden_dim);

    if (cfg_.variant == Variant::Concat) {
      for (std::size_t i = 0; i < B; ++i) {
        const Real* d = dpost_in.row(i);
        for (int k = 0; k <= K; ++k) {
          Real* o = dh[k].row(i);
          for (std::size_t j = 0; j < cfg_.hidden_dim; ++j) {
            o[j] = d[k * cfg_.hidden_dim + j];
          }
        }
      }
    } else {
      // dpost_in splits into the integrated representation and the residual.
      residual_.backward(dpost_in, threads);
      for (std::size_t i = 0; i < B; ++i) {
        const Real* d = dpost_in.row(i);
        for (int k = 0; k <= K; ++k) {
          const Real t = theta_(i, k);
          Real* o = dh[k].row(i);
          for (std::size_t j = 0; j < cfg_.hidden_dim; ++j) o[j] = t * d[j];
        }
      }
      if (cfg_.variant == Variant::Attention) {
        backward_attention(dpost_in, dh, threads);
      }
    }

    for (int k = 0; k <= K; ++k) encoders_[k].backward(dh[k], threads);
  }

  // Hop weights for the cached forward pass (B x (K_f+1)).
  const Matrix<Real>& last_attention() const { return theta_; }

  // Eval-mode attention weights for a batch (export path).
  Matrix<Real> attention_weights(const BatchInput<Real>& batch,
                                 int threads = 1) {
    check(cfg_.variant == Variant::Attention,
          "attention_weights: model variant has no attention");
    Rng rng(0);
    forward(batch, Mode::Eval, rng, threads);
    return theta_;
  }

  void collect_params(std::vector<Parameter<Real>*>& out) {
    for (auto& e : encoders_) e.collect_params(out);
    if (has_attention_) out.push_back(&attention_a_);
    if (has_residual_) residual_.collect_params(out);
    post_.collect_params(out);
  }

  void collect_state(std::vector<TensorRef<Real>>& out) {
    for (auto& e : encoders_) e.collect_state(out);
    if (has_attention_)
      out.push_back({attention_a_.name, &attention_a_.value, false});
    if (has_residual_) residual_.collect_state(out);
    post_.collect_state(out);
  }

  std::size_t param_count() {
    std::vector<Parameter<Real>*> ps;
    collect_params(ps);
    std::size_t total = 0;
    for (auto* p : ps) total += p->size();
    return total;
  }

  // Scalar counts keyed by submodule.
  std::map<std::string, std::size_t> param_breakdown() {
    std::map<std::string, std::size_t> out;
    std::vector<Parameter<Real>*> ps;
    std::vector<Parameter<Real>*> enc_ps;
    for (auto& e : encoders_) e.collect_params(enc_ps);
    for (auto* p : enc_ps) out["hop_encoders"] += p->size();
    if (has_attention_) out["attention"] = attention_a_.size();
    if (has_residual_) {
      std::vector<Parameter<Real>*> rp;
      residual_.collect_params(rp);
      for (auto* p : rp) out["residual"] += p->size();
    }
    std::vector<Parameter<Real>*> pp;
    post_.collect_params(pp);
    for (auto* p : pp) out["post_encoder"] += p->size();
    return out;
  }

  Parameter<Real>& attention_param() { return attention_a_; }
  Mlp<Real>& post_encoder() { return post_; }
  Mlp<Real>& hop_encoder(int k) { return encoders_[k]; }
  Linear<Real>& residual_linear() { return residual_; }

 private:
  void validate_batch(const BatchInput<Real>& batch) const {
    const std::size_t want =
        cfg_.variant == Variant::MlpOnly ? 1 : cfg_.k_f + 1;
    check(batch.hop_blocks.size() == want,
          "SagnModel: wrong number of hop blocks");
    for (const auto& blk : batch.hop_blocks) {
      check(blk.cols == cfg_.in_dim, "SagnModel: hop block dim mismatch");
      check(blk.rows == batch.hop_blocks[0].rows,
            "SagnModel: hop block batch size mismatch");
    }
  }

  void compute_theta(std::size_t B, Mode mode, Rng& rng) {
    const int K = cfg_.k_f;
    theta_.resize(B, K + 1);
    switch (cfg_.variant) {
      case Variant::Uniform:
        theta_.fill(static_cast<Real>(1.0 / (K + 1)));
        return;
      case Variant::ExpDecay: {
        double sum = 0.0;
        for (int k = 0; k <= K; ++k) sum += std::pow(cfg_.exp_ratio, k);
        for (int k = 0; k <= K; ++k) {
          const Real w = static_cast<Real>(std::pow(cfg_.exp_ratio, k) / sum);
          for (std::size_t i = 0; i < B; ++i) theta_(i, k) = w;
        }
        return;
      }
      default:
        break;
    }

    // Attention: logit for hop k at node i is
    // LeakyReLU([H^(0)_i || H^(k)_i] . a), softmax over k. Hop 0 uses the
    // degenerate concatenation [H^(0) || H^(0)].
    const std::size_t h = cfg_.hidden_dim;
    const Real* a_head = attention_a_.value.row(0);
    const Real* a_tail = a_head + h;
    pre_act_.resize(B, K + 1);
    for (std::size_t i = 0; i < B; ++i) {
      const Real* h0 = h_[0].row(i);
      double s0 = 0.0;
      for (std::size_t j = 0; j < h; ++j) {
        s0 += static_cast<double>(h0[j]) * a_head[j];
      }
      for (int k = 0; k <= K; ++k) {
        const Real* hk = h_[k].row(i);
        double sk = 0.0;
        for (std::size_t j = 0; j < h; ++j) {
          sk += static_cast<double>(hk[j]) * a_tail[j];
        }
        pre_act_(i, k) = static_cast<Real>(s0 + sk);
      }
    }
    leaky_relu_forward(pre_act_, cfg_.leaky_slope, logits_raw_);
    clamped_ = logits_raw_;
    for (auto& v : clamped_.data) {
      v = std::clamp(v, static_cast<Real>(-kAttentionLogitClamp),
                     static_cast<Real>(kAttentionLogitClamp));
    }
    if (mode == Mode::Train && cfg_.attention_dropout > 0.0) {
      keep_ = attention_keep_mask(B, K + 1, cfg_.attention_dropout, rng);
      masked_softmax(clamped_, keep_, theta_);
    } else {
      keep_.resize(0, 0);
      softmax_rows(clamped_, theta_);
    }
  }

  static void masked_softmax(const Matrix<Real>& z,
                             const Matrix<std::uint8_t>& keep,
                             Matrix<Real>& y) {
    y.resize(z.rows, z.cols);
    for (std::size_t i = 0; i < z.rows; ++i) {
      Real m = std::numeric_limits<Real>::lowest();
      for (std::size_t j = 0; j < z.cols; ++j) {
        if (keep(i, j)) m = std::max(m, z(i, j));
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < z.cols; ++j) {
        if (keep(i, j)) {
          const double e = std::exp(static_cast<double>(z(i, j) - m));
          y(i, j) = static_cast<Real>(e);
          sum += e;
        } else {
          y(i, j) = Real(0);
        }
      }
      for (std::size_t j = 0; j < z.cols; ++j) {
        y(i, j) = static_cast<Real>(y(i, j) / sum);
      }
    }
  }

  void backward_attention(const Matrix<Real>& dh_att,
                          std::vector<Matrix<Real>>& dh, int threads) {
    (void)threads;
    const int K = cfg_.k_f;
    const std::size_t B = dh_att.rows;
    const std::size_t h = cfg_.hidden_dim;

    // d(theta)[i,k] = <dH_att[i], H^(k)[i]>
    Matrix<Real> dtheta(B, K + 1);
    for (std::size_t i = 0; i < B; ++i) {
      const Real* d = dh_att.row(i);
      for (int k = 0; k <= K; ++k) {
        const Real* hk = h_[k].row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < h; ++j) {
          acc += static_cast<double>(d[j]) * hk[j];
        }
        dtheta(i, k) = static_cast<Real>(acc);
      }
    }

    // Softmax rows hold zeros at dropped hops, so the generic backward
    // already zeroes their gradient.
    Matrix<Real> dclamped;
    softmax_rows_backward(theta_, dtheta, dclamped);
    for (std::size_t i = 0; i < dclamped.data.size(); ++i) {
      if (std::abs(logits_raw_.data[i]) >
          static_cast<Real>(kAttentionLogitClamp)) {
        dclamped.data[i] = Real(0);
      }
    }
    Matrix<Real> ds;
    leaky_relu_backward(pre_act_, dclamped, cfg_.leaky_slope, ds);

    const Real* a_head = attention_a_.value.row(0);
    const Real* a_tail = a_head + h;
    Real* da_head = attention_a_.grad.row(0);
    Real* da_tail = da_head + h;
    for (std::size_t i = 0; i < B; ++i) {
      const Real* h0 = h_[0].row(i);
      double ds_row_sum = 0.0;
      for (int k = 0; k <= K; ++k) {
        const Real dsk = ds(i, k);
        ds_row_sum += dsk;
        const Real* hk = h_[k].row(i);
        Real* dhk = dh[k].row(i);
        for (std::size_t j = 0; j < h; ++j) {
          da_tail[j] += dsk * hk[j];
          dhk[j] += dsk * a_tail[j];
        }
      }
      Real* dh0 = dh[0].row(i);
      for (std::size_t j = 0; j < h; ++j) {
        da_head[j] += static_cast<Real>(ds_row_sum) * h0[j];
        dh0[j] += static_cast<Real>(ds_row_sum) * a_head[j];
      }
    }
  }

  SagnConfig cfg_;
  std::string name_;
  std::vector<Mlp<Real>> encoders_;
  Mlp<Real> post_;
  Linear<Real> residual_;
  Parameter<Real> attention_a_;
  bool has_residual_ = false;
  bool has_attention_ = false;

  // forward caches
  std::vector<Matrix<Real>> xdrop_;
  std::vector<Matrix<Real>> input_mask_;
  Matrix<Real> input_mask_single_;
  std::vector<Matrix<Real>> h_;
  Matrix<Real> theta_;
  Matrix<Real> pre_act_;
  Matrix<Real> logits_raw_;
  Matrix<Real> clamped_;
  Matrix<std::uint8_t> keep_;
  Matrix<Real> h_att_;
  Matrix<Real> concat_;
  Matrix<Real> post_in_;
  Matrix<Real> logits_;
};

}  // namespace sagn
