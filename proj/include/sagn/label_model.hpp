#pragma once

#include <string>
#include <vector>

#include "sagn/graph.hpp"
#include "sagn/metrics.hpp"
#include "sagn/nn.hpp"
#include "sagn/propagate.hpp"

namespace sagn {

enum class TaskKind { SingleLabel, MultiLabel };

inline const char* to_string(TaskKind k) {
  return k == TaskKind::SingleLabel ? "single" : "multi";
}

// Inputs for building the stage-s initial label embedding.
template <typename Real>
struct StageLabelState {
  int stage = 0;
  const Matrix<Real>* hard_pseudo = nullptr;  // required for stage >= 1
  std::vector<NodeId> enhanced;               // L_s
  std::vector<NodeId> raw_train;              // L_0
  TaskKind task = TaskKind::SingleLabel;
  // Fully inductive balancing: raw-train rows keep their true label only if
  // the node is confident; every other raw-train row stays zero.
  bool filter_raw_train = false;
  const std::vector<NodeId>* confident = nullptr;
};

// Initial label embedding:
//   rows in L_0            <- Y_i (ground truth)
//   rows in L_s \ L_0      <- hard pseudo label of the previous stage
//   rows in U_s            <- 0 (single-label) or 0.5 (multi-label)
template <typename Real>
Matrix<Real> init_label_embedding(const StageLabelState<Real>& state,
                                  const Matrix<Real>& y_true) {
  check(state.stage >= 0, "init_label_embedding: negative stage");
  if (state.stage >= 1) {
    check(state.hard_pseudo != nullptr,
          "init_label_embedding: pseudo labels required but absent");
    check(state.hard_pseudo->same_shape(y_true),
          "init_label_embedding: pseudo label shape mismatch");
  }
  if (state.filter_raw_train) {
    check(state.confident != nullptr,
          "init_label_embedding: confident set required for raw-train filter");
  }
  const std::size_t n = y_true.rows;
  const Real fill =
      state.task == TaskKind::MultiLabel ? Real(0.5) : Real(0);
  Matrix<Real> out(n, y_true.cols, fill);

  std::vector<std::uint8_t> in_l0(n, 0);
  for (NodeId i : state.raw_train) in_l0[i] = 1;
  std::vector<std::uint8_t> is_confident;
  if (state.filter_raw_train) {
    is_confident.assign(n, 0);
    for (NodeId i : *state.confident) is_confident[i] = 1;
  }

  // enhanced rows first; raw-train rows then overwrite, so ground truth wins
  // on the overlap
  if (state.stage >= 1) {
    for (NodeId i : state.enhanced) {
      if (!in_l0[i]) {
        for (std::size_t c = 0; c < y_true.cols; ++c) {
          out(i, c) = (*state.hard_pseudo)(i, c);
        }
      }
    }
  }
  for (NodeId i : state.raw_train) {
    const bool keep =
        !state.filter_raw_train || state.stage == 0 || is_confident[i];
    for (std::size_t c = 0; c < y_true.cols; ++c) {
      out(i, c) = keep ? y_true(i, c) : Real(0);
    }
  }
  return out;
}

// The label model: an MLP over the propagated label embedding whose output
// adds to the base model logits. Twice the base layer count.
template <typename Real>
class LabelModel {
 public:
  void init(std::size_t num_classes, std::size_t hidden_dim,
            int base_num_layers, bool use_batchnorm, double dropout_p,
            std::uint64_t seed, const std::string& name = "label") {
    MlpConfig cfg;
    cfg.in_dim = num_classes;
    cfg.hidden_dim = hidden_dim;
    cfg.out_dim = num_classes;
    cfg.num_layers = 2 * base_num_layers;
    cfg.use_batchnorm = use_batchnorm;
    cfg.dropout_p = dropout_p;
    mlp_.init(name, cfg, seed);
  }

  const Matrix<Real>& forward(const Matrix<Real>& y_prop_rows, Mode mode,
                              Rng& rng, int threads = 1) {
    check(y_prop_rows.cols == mlp_.config().in_dim,
          "LabelModel: embedding dim != C");
    return mlp_.forward(y_prop_rows, mode, rng, threads);
  }

  Matrix<Real> backward(const Matrix<Real>& dlogits, int threads = 1) {
    return mlp_.backward(dlogits, threads);
  }

  void collect_params(std::vector<Parameter<Real>*>& out) {
    mlp_.collect_params(out);
  }
  void collect_state(std::vector<TensorRef<Real>>& out) {
    mlp_.collect_state(out);
  }
  Mlp<Real>& mlp() { return mlp_; }

 private:
  Mlp<Real> mlp_;
};

// ---------------------------------------------------------------------------
// Label-leakage probe: how much of a training node's propagated label mass
// comes from its own initial label, and how a label-only linear probe
// generalizes from train to validation at this propagation depth.
// ---------------------------------------------------------------------------

struct LeakageReport {
  int k_l = 0;
  double train_self_mass = 0.0;  // mean (A^k)_{ii} over train nodes
  double train_acc = 0.0;
  double val_acc = 0.0;
  double gap() const { return train_acc - val_acc; }
};

// Mean self-return entry of the k-step operator over the probe nodes,
// computed by propagating indicator columns in blocks.
inline double mean_self_return(const TransitionMatrix& t,
                               const std::vector<NodeId>& nodes, int k,
                               int threads = 1) {
  check(k >= 1, "mean_self_return: k must be >= 1");
  const std::size_t block = 256;
  double sum = 0.0;
  for (std::size_t lo = 0; lo < nodes.size(); lo += block) {
    const std::size_t hi = std::min(nodes.size(), lo + block);
    Matrix<double> ind(t.num_nodes, hi - lo);
    for (std::size_t c = lo; c < hi; ++c) ind(nodes[c], c - lo) = 1.0;
    Matrix<double> prop = propagate_labels(t, ind, k, threads);
    for (std::size_t c = lo; c < hi; ++c) sum += prop(nodes[c], c - lo);
  }
  return nodes.empty() ? 0.0 : sum / static_cast<double>(nodes.size());
}

template <typename Real>
LeakageReport leakage_probe(const TransitionMatrix& t,
                            const Matrix<Real>& y_true,
                            const NodeSplit& split, int k_l,
                            int threads = 1) {
  check(k_l >= 1, "leakage_probe: k_l must be >= 1");
  check(split.setting == SplitSetting::Transductive,
        "leakage_probe: transductive split required");
  LeakageReport report;
  report.k_l = k_l;
  report.train_self_mass = mean_self_return(t, split.train, k_l, threads);

  // label-only linear probe on the propagated embedding
  Matrix<Real> y0(y_true.rows, y_true.cols);
  for (NodeId i : split.train) {
    for (std::size_t c = 0; c < y_true.cols; ++c) y0(i, c) = y_true(i, c);
  }
  Matrix<Real> z = propagate_labels(t, y0, k_l, threads);

  Linear<Real> probe;
  probe.init("probe", y_true.cols, y_true.cols, true, 12345);
  std::vector<Parameter<Real>*> params;
  probe.collect_params(params);
  AdamConfig adam;
  adam.lr = 0.05;

  Matrix<Real> x_train = z.take_rows(split.train);
  Matrix<Real> t_train = y_true.take_rows(split.train);
  Matrix<Real> dlogits;
  for (int step = 1; step <= 200; ++step) {
    const auto& logits = probe.forward(x_train, threads);
    softmax_xent(logits, t_train, dlogits);
    for (auto* p : params) p->zero_grad();
    probe.backward(dlogits, threads);
    adam_step(params, adam, step);
  }

  auto eval_on = [&](const std::vector<NodeId>& nodes) {
    Matrix<Real> logits = probe.forward(z.take_rows(nodes), threads);
    std::vector<int> truth;
    truth.reserve(nodes.size());
    for (NodeId i : nodes) {
      const Real* r = y_true.row(i);
      int best = 0;
      for (std::size_t c = 1; c < y_true.cols; ++c) {
        if (r[c] > r[best]) best = static_cast<int>(c);
      }
      truth.push_back(best);
    }
    return accuracy(truth, argmax_rows(logits));
  };
  report.train_acc = eval_on(split.train);
  report.val_acc = eval_on(split.valid);
  return report;
}

}  // namespace sagn
