#pragma once

#include <string>
#include <vector>

#include "sagn/matrix.hpp"

namespace sagn {

enum class Mode { Train, Eval };

template <typename Real>
struct Parameter {
  std::string name;
  Matrix<Real> value;
  Matrix<Real> grad;
  Matrix<Real> adam_m;
  Matrix<Real> adam_v;

  void setup(std::string n, std::size_t r, std::size_t c) {
    name = std::move(n);
    value.resize(r, c);
    grad.resize(r, c);
    adam_m.resize(r, c);
    adam_v.resize(r, c);
  }

  void zero_grad() { grad.fill(Real(0)); }
  std::size_t size() const { return value.data.size(); }
};

// Named view into model state for checkpointing; buffers (e.g. batchnorm
// running stats) are saved but not counted as parameters.
template <typename Real>
struct TensorRef {
  std::string name;
  Matrix<Real>* tensor = nullptr;
  bool buffer = false;
};

// Parameters are initialized from an RNG seeded by (model seed, name), so
// layouts shared between model variants receive identical values no matter
// in which order the variants construct them.
inline std::uint64_t param_seed(std::uint64_t model_seed,
                                const std::string& name) {
  return model_seed ^ (fnv1a64(name) * 0x9e3779b97f4a7c15ull);
}

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
template <typename Real>
void init_uniform_fan_in(Parameter<Real>& p, std::size_t fan_in,
                         std::uint64_t model_seed) {
  Rng rng(param_seed(model_seed, p.name));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : p.value.data) {
    v = static_cast<Real>(rng.uniform(-bound, bound));
  }
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

template <typename Real>
class Linear {
 public:
  void init(const std::string& name, std::size_t in_dim, std::size_t out_dim,
            bool bias, std::uint64_t model_seed) {
    has_bias_ = bias;
    W.setup(name + ".W", in_dim, out_dim);
    init_uniform_fan_in(W, in_dim, model_seed);
    if (bias) {
      b.setup(name + ".b", 1, out_dim);
      init_uniform_fan_in(b, in_dim, model_seed);
    }
  }

  // y = x W + b
  const Matrix<Real>& forward(const Matrix<Real>& x, int threads = 1) {
    check(x.cols == W.value.rows, "Linear: input dim mismatch");
    x_cache_ = x;
    gemm(x, W.value, y_, threads);
    if (has_bias_) {
      for (std::size_t i = 0; i < y_.rows; ++i) {
        Real* r = y_.row(i);
        const Real* bv = b.value.row(0);
        for (std::size_t j = 0; j < y_.cols; ++j) r[j] += bv[j];
      }
    }
    return y_;
  }

  // Accumulates dW, db; returns dx.
  Matrix<Real> backward(const Matrix<Real>& dy, int threads = 1) {
    check(dy.rows == x_cache_.rows && dy.cols == W.value.cols,
          "Linear: backward shape mismatch");
    Matrix<Real> dW;
    gemm_tn(x_cache_, dy, dW, threads);
    add_inplace(W.grad, dW);
    if (has_bias_) {
      for (std::size_t i = 0; i < dy.rows; ++i) {
        const Real* r = dy.row(i);
        Real* g = b.grad.row(0);
        for (std::size_t j = 0; j < dy.cols; ++j) g[j] += r[j];
      }
    }
    Matrix<Real> dx;
    gemm_nt(dy, W.value, dx, threads);
    return dx;
  }

  void collect_params(std::vector<Parameter<Real>*>& out) {
    out.push_back(&W);
    if (has_bias_) out.push_back(&b);
  }

  void collect_state(std::vector<TensorRef<Real>>& out) {
    out.push_back({W.name, &W.value, false});
    if (has_bias_) out.push_back({b.name, &b.value, false});
  }

  Parameter<Real> W;
  Parameter<Real> b;

 private:
  bool has_bias_ = true;
  Matrix<Real> x_cache_;
  Matrix<Real> y_;
};

// ---------------------------------------------------------------------------
// BatchNorm (per-column). Train mode uses batch statistics and updates the
// running estimates with momentum 0.9; eval mode uses the running estimates.
// ---------------------------------------------------------------------------

template <typename Real>
class BatchNorm {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.9;

  void init(const std::string& name, std::size_t dim) {
    gamma.setup(name + ".gamma", 1, dim);
    gamma.value.fill(Real(1));
    beta.setup(name + ".beta", 1, dim);
    running_mean.resize(1, dim);
    running_var.resize(1, dim);
    running_var.fill(Real(1));
    name_ = name;
  }

  const Matrix<Real>& forward(const Matrix<Real>& x, Mode mode) {
    const std::size_t d = x.cols;
    check(d == gamma.value.cols, "BatchNorm: dim mismatch");
    y_.resize(x.rows, d);
    if (mode == Mode::Train) {
      check(x.rows >= 2, "BatchNorm: train mode needs batch size >= 2");
      const double n = static_cast<double>(x.rows);
      xhat_.resize(x.rows, d);
      inv_std_.assign(d, Real(0));
      for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) mean += x(i, j);
        mean /= n;
        double var = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) {
          const double c = x(i, j) - mean;
          var += c * c;
        }
        var /= n;  // biased, used for normalization
        const double inv = 1.0 / std::sqrt(var + kEps);
        inv_std_[j] = static_cast<Real>(inv);
        for (std::size_t i = 0; i < x.rows; ++i) {
          const Real xh = static_cast<Real>((x(i, j) - mean) * inv);
          xhat_(i, j) = xh;
          y_(i, j) = gamma.value(0, j) * xh + beta.value(0, j);
        }
        const double unbiased = var * n / (n - 1.0);
        running_mean(0, j) = static_cast<Real>(kMomentum * running_mean(0, j) +
                                               (1.0 - kMomentum) * mean);
        running_var(0, j) = static_cast<Real>(kMomentum * running_var(0, j) +
                                              (1.0 - kMomentum) * unbiased);
      }
    } else {
      for (std::size_t j = 0; j < d; ++j) {
        const double inv =
            1.0 / std::sqrt(static_cast<double>(running_var(0, j)) + kEps);
        for (std::size_t i = 0; i < x.rows; ++i) {
          const Real xh =
              static_cast<Real>((x(i, j) - running_mean(0, j)) * inv);
          y_(i, j) = gamma.value(0, j) * xh + beta.value(0, j);
        }
      }
      eval_forward_x_ = x;  // needed if backward is requested in eval mode
    }
    train_mode_ = (mode == Mode::Train);
    return y_;
  }

  Matrix<Real> backward(const Matrix<Real>& dy) {
    const std::size_t d = gamma.value.cols;
    Matrix<Real> dx(dy.rows, d);
    if (train_mode_) {
      const double n = static_cast<double>(dy.rows);
      for (std::size_t j = 0; j < d; ++j) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t i = 0; i < dy.rows; ++i) {
          sum_dy += dy(i, j);
          sum_dy_xhat += static_cast<double>(dy(i, j)) * xhat_(i, j);
        }
        gamma.grad(0, j) += static_cast<Real>(sum_dy_xhat);
        beta.grad(0, j) += static_cast<Real>(sum_dy);
        const double g = gamma.value(0, j);
        const double inv = inv_std_[j];
        for (std::size_t i = 0; i < dy.rows; ++i) {
          dx(i, j) = static_cast<Real>(
              g * inv *
              (dy(i, j) - sum_dy / n - xhat_(i, j) * sum_dy_xhat / n));
        }
      }
    } else {
      for (std::size_t j = 0; j < d; ++j) {
        const double inv =
            1.0 / std::sqrt(static_cast<double>(running_var(0, j)) + kEps);
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t i = 0; i < dy.rows; ++i) {
          const double xh =
              (eval_forward_x_(i, j) - running_mean(0, j)) * inv;
          sum_dy += dy(i, j);
          sum_dy_xhat += static_cast<double>(dy(i, j)) * xh;
          dx(i, j) = static_cast<Real>(gamma.value(0, j) * inv * dy(i, j));
        }
        gamma.grad(0, j) += static_cast<Real>(sum_dy_xhat);
        beta.grad(0, j) += static_cast<Real>(sum_dy);
      }
    }
    return dx;
  }

  void collect_params(std::vector<Parameter<Real>*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }

  void collect_state(std::vector<TensorRef<Real>>& out) {
    out.push_back({gamma.name, &gamma.value, false});
    out.push_back({beta.name, &beta.value, false});
    out.push_back({name_ + ".running_mean", &running_mean, true});
    out.push_back({name_ + ".running_var", &running_var, true});
  }

  Parameter<Real> gamma;
  Parameter<Real> beta;
  Matrix<Real> running_mean;
  Matrix<Real> running_var;

 private:
  std::string name_;
  Matrix<Real> y_;
  Matrix<Real> xhat_;
  Matrix<Real> eval_forward_x_;
  std::vector<Real> inv_std_;
  bool train_mode_ = true;
};

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

// The subgradient at exactly 0 takes the positive branch.
template <typename Real>
void leaky_relu_forward(const Matrix<Real>& x, double slope, Matrix<Real>& y) {
  y.resize(x.rows, x.cols);
  const Real s = static_cast<Real>(slope);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    y.data[i] = x.data[i] >= Real(0) ? x.data[i] : s * x.data[i];
  }
}

template <typename Real>
void leaky_relu_backward(const Matrix<Real>& x, const Matrix<Real>& dy,
                         double slope, Matrix<Real>& dx) {
  check(x.same_shape(dy), "leaky_relu_backward: shape mismatch");
  dx.resize(x.rows, x.cols);
  const Real s = static_cast<Real>(slope);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    dx.data[i] = x.data[i] >= Real(0) ? dy.data[i] : s * dy.data[i];
  }
}

template <typename Real>
void relu_forward(const Matrix<Real>& x, Matrix<Real>& y) {
  leaky_relu_forward(x, 0.0, y);
}

template <typename Real>
void relu_backward(const Matrix<Real>& x, const Matrix<Real>& dy,
                   Matrix<Real>& dx) {
  leaky_relu_backward(x, dy, 0.0, dx);
}

// ---------------------------------------------------------------------------
// Row softmax, numerically stable via max subtraction.
// ---------------------------------------------------------------------------

template <typename Real>
void softmax_rows(const Matrix<Real>& z, Matrix<Real>& y) {
  y.resize(z.rows, z.cols);
  for (std::size_t i = 0; i < z.rows; ++i) {
    const Real* zi = z.row(i);
    Real* yi = y.row(i);
    Real m = zi[0];
    for (std::size_t j = 1; j < z.cols; ++j) m = std::max(m, zi[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < z.cols; ++j) {
      const double e = std::exp(static_cast<double>(zi[j] - m));
      yi[j] = static_cast<Real>(e);
      sum += e;
    }
    for (std::size_t j = 0; j < z.cols; ++j) {
      yi[j] = static_cast<Real>(yi[j] / sum);
    }
  }
}

// dz_i = y_i * (dy_i - <dy_i, y_i>)
template <typename Real>
void softmax_rows_backward(const Matrix<Real>& y, const Matrix<Real>& dy,
                           Matrix<Real>& dz) {
  check(y.same_shape(dy), "softmax_rows_backward: shape mismatch");
  dz.resize(y.rows, y.cols);
  for (std::size_t i = 0; i < y.rows; ++i) {
    const Real* yi = y.row(i);
    const Real* di = dy.row(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < y.cols; ++j) {
      dot += static_cast<double>(di[j]) * yi[j];
    }
    Real* o = dz.row(i);
    for (std::size_t j = 0; j < y.cols; ++j) {
      o[j] = static_cast<Real>(yi[j] * (di[j] - dot));
    }
  }
}

// ---------------------------------------------------------------------------
// Dropout. Standard and input kinds are inverted dropout (scale by
// 1/(1-p) at train time); the attention kind is a boolean keep-mask applied
// to pre-softmax hop logits so the surviving weights renormalize.
// ---------------------------------------------------------------------------

// mask receives the applied factors so the backward pass can reuse it; an
// empty mask means the call was an identity.
template <typename Real>
void dropout_forward(const Matrix<Real>& x, double p, Mode mode, Rng& rng,
                     Matrix<Real>& y, Matrix<Real>& mask) {
  check(p >= 0.0 && p < 1.0, "dropout: p must be in [0,1)");
  if (mode == Mode::Eval || p == 0.0) {
    y = x;
    mask.resize(0, 0);
    return;
  }
  const Real scale = static_cast<Real>(1.0 / (1.0 - p));
  mask.resize(x.rows, x.cols);
  y.resize(x.rows, x.cols);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    mask.data[i] = rng.uniform() >= p ? scale : Real(0);
    y.data[i] = x.data[i] * mask.data[i];
  }
}

template <typename Real>
void dropout_backward(const Matrix<Real>& dy, const Matrix<Real>& mask,
                      Matrix<Real>& dx) {
  if (mask.data.empty()) {
    dx = dy;
    return;
  }
  check(dy.same_shape(mask), "dropout_backward: shape mismatch");
  dx.resize(dy.rows, dy.cols);
  for (std::size_t i = 0; i < dy.data.size(); ++i) {
    dx.data[i] = dy.data[i] * mask.data[i];
  }
}

// Keep-mask for attention logits. A row whose every entry would drop keeps
// all of them: the softmax needs at least one live logit.
inline Matrix<std::uint8_t> attention_keep_mask(std::size_t rows,
                                                std::size_t cols, double p,
                                                Rng& rng) {
  check(p >= 0.0 && p < 1.0, "attention dropout: p must be in [0,1)");
  Matrix<std::uint8_t> mask(rows, cols, 1);
  if (p == 0.0) return mask;
  for (std::size_t i = 0; i < rows; ++i) {
    bool any = false;
    std::uint8_t* r = mask.row(i);
    for (std::size_t j = 0; j < cols; ++j) {
      r[j] = rng.uniform() >= p ? 1 : 0;
      any = any || r[j];
    }
    if (!any) {
      for (std::size_t j = 0; j < cols; ++j) r[j] = 1;
    }
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Losses. Both return the batch-mean loss and write dlogits for the same
// normalization; probabilities are clamped at 1e-12 inside the log.
// ---------------------------------------------------------------------------

constexpr double kProbClamp = 1e-12;

// Cross-entropy over softmax rows against (possibly soft) target rows.
template <typename Real>
double softmax_xent(const Matrix<Real>& logits, const Matrix<Real>& targets,
                    Matrix<Real>& dlogits, Matrix<Real>* probs_out = nullptr) {
  check(logits.same_shape(targets), "softmax_xent: shape mismatch");
  check(logits.rows > 0, "softmax_xent: empty batch");
  Matrix<Real> probs;
  softmax_rows(logits, probs);
  const double inv_b = 1.0 / static_cast<double>(logits.rows);
  double loss = 0.0;
  dlogits.resize(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    for (std::size_t c = 0; c < logits.cols; ++c) {
      const double t = targets(i, c);
      if (t != 0.0) {
        loss -= t * std::log(std::max(static_cast<double>(probs(i, c)),
                                      kProbClamp));
      }
      dlogits(i, c) = static_cast<Real>((probs(i, c) - t) * inv_b);
    }
  }
  if (probs_out) *probs_out = probs;
  return loss * inv_b;
}

// Per-label binary cross-entropy with logits; loss per node sums over
// labels, batch-mean over nodes.
template <typename Real>
double sigmoid_bce(const Matrix<Real>& logits, const Matrix<Real>& targets,
                   Matrix<Real>& dlogits, Matrix<Real>* probs_out = nullptr) {
  check(logits.same_shape(targets), "sigmoid_bce: shape mismatch");
  check(logits.rows > 0, "sigmoid_bce: empty batch");
  const double inv_b = 1.0 / static_cast<double>(logits.rows);
  double loss = 0.0;
  dlogits.resize(logits.rows, logits.cols);
  if (probs_out) probs_out->resize(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.data.size(); ++i) {
    const double z = logits.data[i];
    const double t = targets.data[i];
    const double p = 1.0 / (1.0 + std::exp(-z));
    loss -= t * std::log(std::max(p, kProbClamp)) +
            (1.0 - t) * std::log(std::max(1.0 - p, kProbClamp));
    dlogits.data[i] = static_cast<Real>((p - t) * inv_b);
    if (probs_out) probs_out->data[i] = static_cast<Real>(p);
  }
  return loss * inv_b;
}

// ---------------------------------------------------------------------------
// Adam with bias correction; weight decay folds into the gradient before the
// moment update.
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

template <typename Real>
void adam_step(const std::vector<Parameter<Real>*>& params,
               const AdamConfig& cfg, std::int64_t step) {
  check(step >= 1, "adam_step: step is 1-based");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (Parameter<Real>* p : params) {
    for (std::size_t i = 0; i < p->value.data.size(); ++i) {
      double g = p->grad.data[i];
      if (cfg.weight_decay != 0.0) {
        g += cfg.weight_decay * static_cast<double>(p->value.data[i]);
      }
      const double m =
          cfg.beta1 * static_cast<double>(p->adam_m.data[i]) +
          (1.0 - cfg.beta1) * g;
      const double v =
          cfg.beta2 * static_cast<double>(p->adam_v.data[i]) +
          (1.0 - cfg.beta2) * g * g;
      p->adam_m.data[i] = static_cast<Real>(m);
      p->adam_v.data[i] = static_cast<Real>(v);
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      p->value.data[i] -=
          static_cast<Real>(cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

// ---------------------------------------------------------------------------
// MLP: num_layers linear layers; hidden layers run
// Linear -> BatchNorm -> ReLU -> Dropout, the last layer is plain linear.
// ---------------------------------------------------------------------------

struct MlpConfig {
  std::size_t in_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t out_dim = 0;
  int num_layers = 1;
  bool use_batchnorm = true;
  double dropout_p = 0.0;
};

template <typename Real>
class Mlp {
 public:
  void init(const std::string& name, const MlpConfig& cfg,
            std::uint64_t model_seed) {
    check(cfg.num_layers >= 1, "Mlp: num_layers must be >= 1");
    check(cfg.dropout_p >= 0.0 && cfg.dropout_p < 1.0,
          "Mlp: dropout_p must be in [0,1)");
    cfg_ = cfg;
    const int L = cfg.num_layers;
    linears_.resize(L);
    if (cfg.use_batchnorm) bns_.resize(L - 1);
    for (int l = 0; l < L; ++l) {
      const std::size_t in = l == 0 ? cfg.in_dim : cfg.hidden_dim;
      const std::size_t out = l == L - 1 ? cfg.out_dim : cfg.hidden_dim;
      linears_[l].init(name + ".lin" + std::to_string(l), in, out, true,
                       model_seed);
      if (l < L - 1 && cfg.use_batchnorm) {
        bns_[l].init(name + ".bn" + std::to_string(l), out);
      }
    }
    relu_in_.resize(L - 1);
    drop_mask_.resize(L - 1);
    stage_.resize(L - 1);
  }

  const Matrix<Real>& forward(const Matrix<Real>& x, Mode mode, Rng& rng,
                              int threads = 1) {
    const int L = cfg_.num_layers;
    const Matrix<Real>* h = &x;
    for (int l = 0; l < L; ++l) {
      h = &linears_[l].forward(*h, threads);
      if (l < L - 1) {
        if (cfg_.use_batchnorm) h = &bns_[l].forward(*h, mode);
        relu_in_[l] = *h;
        relu_forward(relu_in_[l], act_);
        dropout_forward(act_, cfg_.dropout_p, mode, rng, stage_[l],
                        drop_mask_[l]);
        h = &stage_[l];
      }
    }
    out_ = *h;
    return out_;
  }

  Matrix<Real> backward(const Matrix<Real>& dy, int threads = 1) {
    const int L = cfg_.num_layers;
    Matrix<Real> d = dy;
    for (int l = L - 1; l >= 0; --l) {
      if (l < L - 1) {
        Matrix<Real> tmp;
        dropout_backward(d, drop_mask_[l], tmp);
        relu_backward(relu_in_[l], tmp, d);
        if (cfg_.use_batchnorm) d = bns_[l].backward(d);
      }
      d = linears_[l].backward(d, threads);
    }
    return d;
  }

  void collect_params(std::vector<Parameter<Real>*>& out) {
    for (auto& l : linears_) l.collect_params(out);
    for (auto& b : bns_) b.collect_params(out);
  }

  void collect_state(std::vector<TensorRef<Real>>& out) {
    for (auto& l : linears_) l.collect_state(out);
    for (auto& b : bns_) b.collect_state(out);
  }

  const MlpConfig& config() const { return cfg_; }
  Linear<Real>& layer(int l) { return linears_[l]; }

 private:
  MlpConfig cfg_;
  std::vector<Linear<Real>> linears_;
  std::vector<BatchNorm<Real>> bns_;
  std::vector<Matrix<Real>> relu_in_;
  std::vector<Matrix<Real>> drop_mask_;
  std::vector<Matrix<Real>> stage_;
  Matrix<Real> act_;
  Matrix<Real> out_;
};

}  // namespace sagn
