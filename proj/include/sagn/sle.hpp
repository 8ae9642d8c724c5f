#pragma once

#include <string>
#include <vector>

#include "sagn/dataset.hpp"
#include "sagn/label_model.hpp"
#include "sagn/metrics.hpp"
#include "sagn/sagn.hpp"

namespace sagn {

struct MetricRecord {
  int stage = 0;
  int epoch = 0;
  std::string split;
  std::string metric;
  double value = 0.0;
  double wall_ms = 0.0;
};

// Defaults follow the reference transductive configuration (lr 1e-3,
// hidden 512, 2 layers, K_f 3, K_l 9, dropout 0.5/0.4/0.2, batch 50000,
// threshold 0.9, row-stochastic transition).
struct SleConfig {
  // model
  Variant variant = Variant::Attention;
  std::size_t hidden_dim = 512;
  int num_layers = 2;
  int k_f = 3;
  int k_l = 9;
  double dropout = 0.5;
  double attention_dropout = 0.4;
  double input_dropout = 0.2;
  double exp_ratio = 0.5;
  double leaky_slope = 0.2;
  bool use_batchnorm = true;

  // staging
  int stages = 0;           // S; stage 0 always runs
  double threshold = 0.9;   // beta (single-label) or tau (multi-label)
  bool use_label_model = true;
  // Fully inductive balancing: filter raw-train rows of the label embedding
  // by confidence as well.
  bool inductive_filter_train_labels = false;

  // optimization
  std::vector<int> epochs = {1000, 200, 200};  // per stage; last repeats
  double lr = 1e-3;
  double weight_decay = 0.0;
  std::size_t batch_size = 50000;
  int eval_interval = 10;

  // environment
  TransitionKind transition = TransitionKind::RowStochastic;
  bool add_self_loops = true;
  std::uint64_t seed = 0;
  int threads = 1;

  int epochs_for_stage(int s) const {
    check(!epochs.empty(), "SleConfig: epochs list is empty");
    return s < static_cast<int>(epochs.size()) ? epochs[s] : epochs.back();
  }

  void validate(TaskKind task) const {
    check(stages >= 0, "SleConfig: stages must be >= 0");
    check(k_f >= 0 && k_l >= 1, "SleConfig: bad hop counts");
    check(hidden_dim > 0 && num_layers >= 1, "SleConfig: bad model dims");
    check(batch_size >= 1, "SleConfig: batch_size must be >= 1");
    check(eval_interval >= 1, "SleConfig: eval_interval must be >= 1");
    for (int e : epochs) check(e >= 1, "SleConfig: epochs must be >= 1");
    if (stages > 0) {
      if (task == TaskKind::SingleLabel) {
        check(threshold > 0.0 && threshold < 1.0,
              "SleConfig: single-label threshold must lie in (0,1)");
      } else {
        check(threshold > 0.0 && threshold < std::log(2.0),
              "SleConfig: multi-label entropy threshold must lie in "
              "(0, log 2)");
      }
    }
  }
};

template <typename Real>
struct NamedTensor {
  std::string name;
  Matrix<Real> value;
  bool buffer = false;
};

template <typename Real>
struct StageState {
  int stage = 0;
  std::vector<NodeId> l_s;
  std::vector<NodeId> u_s;
  std::size_t confident_count = 0;
  Matrix<Real> y_soft;      // full-graph probabilities of the best model
  std::vector<int> y_hard;  // argmax ids (single-label)
  Matrix<Real> y_hard01;    // one-hot / thresholded hard labels
  double best_val_metric = 0.0;
  double test_at_best = 0.0;
  double train_at_best = 0.0;
  double wall_ms = 0.0;
  std::vector<MetricRecord> history;
  std::vector<NamedTensor<Real>> checkpoint;
};

// ---------------------------------------------------------------------------
// Confidence filtering and training-set enhancement.
// ---------------------------------------------------------------------------

// Single-label: max predicted probability >= threshold. Multi-label: mean
// per-label binary entropy (natural log) below the threshold.
template <typename Real>
std::vector<NodeId> filter_confident(const Matrix<Real>& y_soft,
                                     double threshold, TaskKind task,
                                     const std::vector<NodeId>& eligible) {
  std::vector<NodeId> out;
  for (NodeId i : eligible) {
    const Real* row = y_soft.row(i);
    if (task == TaskKind::SingleLabel) {
      Real best = row[0];
      for (std::size_t c = 1; c < y_soft.cols; ++c) {
        best = std::max(best, row[c]);
      }
      if (static_cast<double>(best) >= threshold) out.push_back(i);
    } else {
      double entropy = 0.0;
      for (std::size_t c = 0; c < y_soft.cols; ++c) {
        const double p = std::min(std::max(static_cast<double>(row[c]),
                                           kProbClamp),
                                  1.0 - kProbClamp);
        entropy -= p * std::log(p) + (1.0 - p) * std::log(1.0 - p);
      }
      if (entropy / static_cast<double>(y_soft.cols) < threshold) {
        out.push_back(i);
      }
    }
  }
  return out;
}

inline std::vector<NodeId> enhance_training_set(
    const std::vector<NodeId>& l0, const std::vector<NodeId>& confident) {
  std::vector<NodeId> out = l0;
  out.insert(out.end(), confident.begin(), confident.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Stage loss: ground truth targets on L_0, hard pseudo labels on L_s \ L_0,
// batch-mean normalization.
// ---------------------------------------------------------------------------

template <typename Real>
double stage_loss(const Matrix<Real>& logits,
                  const std::vector<NodeId>& batch,
                  const Matrix<Real>& y_true, const Matrix<Real>* y_pseudo,
                  const std::vector<std::uint8_t>& in_l0,
                  const std::vector<std::uint8_t>& in_ls, TaskKind task,
                  Matrix<Real>& dlogits) {
  check(logits.rows == batch.size(), "stage_loss: batch size mismatch");
  Matrix<Real> targets(batch.size(), logits.cols);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const NodeId i = batch[b];
    check(in_ls[i], "stage_loss: batch node outside the enhanced set");
    const Real* src = nullptr;
    if (in_l0[i]) {
      src = y_true.row(i);
    } else {
      check(y_pseudo != nullptr,
            "stage_loss: pseudo labels required for enhanced nodes");
      src = y_pseudo->row(i);
    }
    for (std::size_t c = 0; c < logits.cols; ++c) targets(b, c) = src[c];
  }
  return task == TaskKind::SingleLabel
             ? softmax_xent(logits, targets, dlogits)
             : sigmoid_bce(logits, targets, dlogits);
}

// ---------------------------------------------------------------------------
// Combined base + label model.
// ---------------------------------------------------------------------------

template <typename Real>
class CombinedModel {
 public:
  void init(const SagnConfig& base_cfg, bool with_label,
            std::size_t num_classes, std::uint64_t seed) {
    base_.init(base_cfg, seed, "base");
    has_label_ = with_label;
    if (with_label) {
      label_.init(num_classes, base_cfg.hidden_dim, base_cfg.num_layers,
                  base_cfg.use_batchnorm, base_cfg.dropout, seed, "label");
    }
  }

  // logits = base(batch) + label(label_rows); either term alone when the
  // other is absent.
  const Matrix<Real>& forward(const BatchInput<Real>& batch,
                              const Matrix<Real>* label_rows, Mode mode,
                              Rng& rng, int threads = 1) {
    logits_ = base_.forward(batch, mode, rng, threads);
    label_used_ = has_label_ && label_rows != nullptr;
    if (label_used_) {
      add_inplace(logits_, label_.forward(*label_rows, mode, rng, threads));
    }
    return logits_;
  }

  void backward(const Matrix<Real>& dlogits, int threads = 1) {
    base_.backward(dlogits, threads);
    if (label_used_) label_.backward(dlogits, threads);
  }

  void collect_params(std::vector<Parameter<Real>*>& out) {
    base_.collect_params(out);
    if (has_label_) label_.collect_params(out);
  }
  void collect_state(std::vector<TensorRef<Real>>& out) {
    base_.collect_state(out);
    if (has_label_) label_.collect_state(out);
  }

  std::vector<NamedTensor<Real>> snapshot() {
    std::vector<TensorRef<Real>> refs;
    collect_state(refs);
    std::vector<NamedTensor<Real>> out;
    out.reserve(refs.size());
    for (auto& r : refs) out.push_back({r.name, *r.tensor, r.buffer});
    return out;
  }

  void restore(const std::vector<NamedTensor<Real>>& snap) {
    std::vector<TensorRef<Real>> refs;
    collect_state(refs);
    check(refs.size() == snap.size(), "restore: state layout mismatch");
    for (std::size_t i = 0; i < refs.size(); ++i) {
      check(refs[i].name == snap[i].name, "restore: state name mismatch");
      *refs[i].tensor = snap[i].value;
    }
  }

  SagnModel<Real>& base() { return base_; }
  LabelModel<Real>& label() { return label_; }
  bool has_label() const { return has_label_; }

 private:
  SagnModel<Real> base_;
  LabelModel<Real> label_;
  bool has_label_ = false;
  bool label_used_ = false;
  Matrix<Real> logits_;
};

// Full-graph probabilities in fixed row blocks (eval mode).
template <typename Real>
Matrix<Real> predict_full(CombinedModel<Real>& model,
                          const HopFeatures<Real>& hops,
                          const Matrix<Real>* label_embedding, TaskKind task,
                          Variant variant, int threads = 1) {
  const std::size_t n = hops.hops[0].rows;
  const std::size_t block = 8192;
  Matrix<Real> probs;
  Rng rng(0);  // unused in eval mode
  for (std::size_t lo = 0; lo < n; lo += block) {
    const std::size_t hi = std::min(n, lo + block);
    std::vector<NodeId> nodes;
    nodes.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) {
      nodes.push_back(static_cast<NodeId>(i));
    }
    BatchInput<Real> batch = make_batch(hops, nodes, variant);
    Matrix<Real> label_rows;
    const Matrix<Real>* label_ptr = nullptr;
    if (label_embedding) {
      label_rows = label_embedding->take_rows(nodes);
      label_ptr = &label_rows;
    }
    Matrix<Real> logits =
        model.forward(batch, label_ptr, Mode::Eval, rng, threads);
    if (probs.rows == 0) probs.resize(n, logits.cols);
    if (task == TaskKind::SingleLabel) {
      Matrix<Real> block_probs;
      softmax_rows(logits, block_probs);
      for (std::size_t i = lo; i < hi; ++i) {
        for (std::size_t c = 0; c < probs.cols; ++c) {
          probs(i, c) = block_probs(i - lo, c);
        }
      }
    } else {
      for (std::size_t i = lo; i < hi; ++i) {
        for (std::size_t c = 0; c < probs.cols; ++c) {
          const double z = logits(i - lo, c);
          probs(i, c) = static_cast<Real>(1.0 / (1.0 + std::exp(-z)));
        }
      }
    }
  }
  return probs;
}

template <typename Real>
double split_metric(const Dataset<Real>& data, const Matrix<Real>& probs,
                    const std::vector<NodeId>& nodes) {
  if (data.task == TaskKind::SingleLabel) {
    return accuracy(data.label_ids_of(nodes),
                    argmax_rows(probs.take_rows(nodes)));
  }
  return micro_f1(data.labels_multi.take_rows(nodes),
                  threshold_probs(probs.take_rows(nodes)));
}

// ---------------------------------------------------------------------------
// One training stage.
// ---------------------------------------------------------------------------

template <typename Real>
struct StageInputs {
  const Dataset<Real>* data = nullptr;
  const HopFeatures<Real>* train_hops = nullptr;  // rows read by batches
  const HopFeatures<Real>* infer_hops = nullptr;  // rows read at inference
  const Matrix<Real>* label_train = nullptr;      // null = no label model
  const Matrix<Real>* label_infer = nullptr;
  std::vector<NodeId> l_s;
  const Matrix<Real>* pseudo_hard = nullptr;  // null at stage 0
  int stage = 0;
  std::size_t confident_count = 0;
};

template <typename Real>
SagnConfig make_model_config(const SleConfig& cfg, const Dataset<Real>& data) {
  SagnConfig m;
  m.in_dim = data.features.cols;
  m.hidden_dim = cfg.hidden_dim;
  m.num_classes = data.num_classes;
  m.k_f = cfg.k_f;
  m.num_layers = cfg.num_layers;
  m.variant = cfg.variant;
  m.exp_ratio = cfg.exp_ratio;
  m.dropout = cfg.dropout;
  m.input_dropout = cfg.input_dropout;
  m.attention_dropout = cfg.attention_dropout;
  m.leaky_slope = cfg.leaky_slope;
  m.use_batchnorm = cfg.use_batchnorm;
  return m;
}

// Consecutive mini-batches; a trailing singleton merges into the previous
// batch so train-mode batchnorm always sees at least two rows.
inline std::vector<std::vector<NodeId>> make_batches(
    const std::vector<NodeId>& order, std::size_t batch_size) {
  std::vector<std::vector<NodeId>> out;
  for (std::size_t lo = 0; lo < order.size(); lo += batch_size) {
    const std::size_t hi = std::min(order.size(), lo + batch_size);
    out.emplace_back(order.begin() + lo, order.begin() + hi);
  }
  if (out.size() >= 2 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back()[0]);
    out.pop_back();
  }
  return out;
}

template <typename Real>
StageState<Real> train_stage(const StageInputs<Real>& in,
                             const SleConfig& cfg) {
  Stopwatch sw;
  const Dataset<Real>& data = *in.data;
  check(!in.l_s.empty(), "train_stage: empty training set");
  check_data(!data.split.valid.empty(), "train_stage: empty validation set");

  const std::uint64_t stage_seed =
      cfg.seed * 0x100000001b3ull + static_cast<std::uint64_t>(in.stage) + 1;
  const bool with_label = in.label_train != nullptr;

  CombinedModel<Real> model;
  model.init(make_model_config(cfg, data), with_label, data.num_classes,
             stage_seed);
  std::vector<Parameter<Real>*> params;
  model.collect_params(params);

  AdamConfig adam;
  adam.lr = cfg.lr;
  adam.weight_decay = cfg.weight_decay;
  Rng rng(stage_seed ^ 0x5deece66d1583f9dull);

  const Matrix<Real> y_true = data.one_hot_labels();
  std::vector<std::uint8_t> in_l0(data.num_nodes(), 0);
  for (NodeId i : data.split.train) in_l0[i] = 1;
  std::vector<std::uint8_t> in_ls(data.num_nodes(), 0);
  for (NodeId i : in.l_s) in_ls[i] = 1;

  StageState<Real> st;
  st.stage = in.stage;
  st.l_s = in.l_s;
  st.confident_count = in.confident_count;
  for (NodeId i = 0; i < data.num_nodes(); ++i) {
    if (!in_ls[i]) st.u_s.push_back(i);
  }

  const std::string metric_name =
      to_string(data.task == TaskKind::SingleLabel ? MetricKind::Accuracy
                                                   : MetricKind::MicroF1);
  const int epochs = cfg.epochs_for_stage(in.stage);
  std::int64_t adam_t = 0;
  double best_val = -1.0;
  std::vector<NamedTensor<Real>> best_snapshot;
  std::vector<NodeId> order = in.l_s;
  Matrix<Real> dlogits;

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (const auto& nodes : make_batches(order, cfg.batch_size)) {
      BatchInput<Real> batch =
          make_batch(*in.train_hops, nodes, cfg.variant);
      Matrix<Real> label_rows;
      const Matrix<Real>* label_ptr = nullptr;
      if (with_label) {
        label_rows = in.label_train->take_rows(nodes);
        label_ptr = &label_rows;
      }
      const Matrix<Real>& logits =
          model.forward(batch, label_ptr, Mode::Train, rng, cfg.threads);
      const double loss =
          stage_loss(logits, nodes, y_true, in.pseudo_hard, in_l0, in_ls,
                     data.task, dlogits);
      if (!std::isfinite(loss)) {
        throw numeric_error(
            "training diverged (non-finite loss) at stage " +
            std::to_string(in.stage) + " epoch " + std::to_string(epoch) +
            " seed " + std::to_string(cfg.seed) +
            "; rerun with this seed to reproduce");
      }
      for (auto* p : params) p->zero_grad();
      model.backward(dlogits, cfg.threads);
      adam_step(params, adam, ++adam_t);
      loss_sum += loss * static_cast<double>(nodes.size());
      loss_count += nodes.size();
    }
    st.history.push_back({in.stage, epoch, "train", "loss",
                          loss_sum / static_cast<double>(loss_count),
                          sw.ms()});

    if (epoch % cfg.eval_interval == 0 || epoch == epochs) {
      Matrix<Real> probs =
          predict_full(model, *in.infer_hops, in.label_infer, data.task,
                       cfg.variant, cfg.threads);
      const double train_m = split_metric(data, probs, data.split.train);
      const double val_m = split_metric(data, probs, data.split.valid);
      const double test_m = split_metric(data, probs, data.split.test);
      st.history.push_back(
          {in.stage, epoch, "train", metric_name, train_m, sw.ms()});
      st.history.push_back(
          {in.stage, epoch, "valid", metric_name, val_m, sw.ms()});
      st.history.push_back(
          {in.stage, epoch, "test", metric_name, test_m, sw.ms()});
      if (val_m > best_val) {
        best_val = val_m;
        st.best_val_metric = val_m;
        st.test_at_best = test_m;
        st.train_at_best = train_m;
        best_snapshot = model.snapshot();
      }
    }
  }

  model.restore(best_snapshot);
  st.y_soft = predict_full(model, *in.infer_hops, in.label_infer, data.task,
                           cfg.variant, cfg.threads);
  if (data.task == TaskKind::SingleLabel) {
    st.y_hard = argmax_rows(st.y_soft);
    st.y_hard01 = one_hot<Real>(st.y_hard, data.num_classes);
  } else {
    st.y_hard01 = threshold_probs(st.y_soft);
  }
  st.checkpoint = model.snapshot();
  st.wall_ms = sw.ms();
  return st;
}

// ---------------------------------------------------------------------------
// Inductive propagation rules and the full multi-stage loop.
// ---------------------------------------------------------------------------

struct PropagationPlan {
  bool inductive = false;
  // The label model is disabled at stage 0 when propagation is restricted
  // to the train graph: there is nothing for labels to propagate into.
  bool label_model_at_stage0 = true;
};

inline PropagationPlan apply_inductive_rules(const NodeSplit& split) {
  PropagationPlan plan;
  plan.inductive = split.setting == SplitSetting::Inductive;
  plan.label_model_at_stage0 = !plan.inductive;
  return plan;
}

template <typename Real>
struct RunResult {
  std::vector<StageState<Real>> stages;
  double wall_ms = 0.0;
};

template <typename Real>
RunResult<Real> run_sle(const Dataset<Real>& data, const SleConfig& cfg) {
  cfg.validate(data.task);
  data.validate();
  Stopwatch sw;

  const PropagationPlan plan = apply_inductive_rules(data.split);
  const Graph g_full =
      cfg.add_self_loops ? with_self_loops(data.graph) : data.graph;
  const TransitionMatrix t_full =
      normalize(g_full, cfg.transition, cfg.add_self_loops);

  // Feature propagation runs exactly once.
  HopFeatures<Real> hops_full =
      propagate_features(t_full, data.features, cfg.k_f, cfg.threads);

  // Inductive: raw-train rows are recomputed on the induced train graph for
  // use in training batches; inference keeps full-graph rows.
  InducedSubgraph train_sub;
  TransitionMatrix t_train;
  HopFeatures<Real> hops_train;
  if (plan.inductive) {
    train_sub = induced_subgraph(data.graph, data.split.train);
    const Graph g_train = cfg.add_self_loops
                              ? with_self_loops(train_sub.graph)
                              : train_sub.graph;
    t_train = normalize(g_train, cfg.transition, cfg.add_self_loops);
    Matrix<Real> x_train = data.features.take_rows(train_sub.new_to_old);
    HopFeatures<Real> sub_hops =
        propagate_features(t_train, x_train, cfg.k_f, cfg.threads);
    hops_train = hops_full;
    for (int k = 0; k <= cfg.k_f; ++k) {
      for (std::size_t r = 0; r < train_sub.new_to_old.size(); ++r) {
        const NodeId old_id = train_sub.new_to_old[r];
        for (std::size_t c = 0; c < hops_train.hops[k].cols; ++c) {
          hops_train.hops[k](old_id, c) = sub_hops.hops[k](r, c);
        }
      }
    }
  }
  const HopFeatures<Real>& batch_hops =
      plan.inductive ? hops_train : hops_full;

  const Matrix<Real> y_true = data.one_hot_labels();
  std::vector<NodeId> all_nodes(data.num_nodes());
  for (NodeId i = 0; i < data.num_nodes(); ++i) all_nodes[i] = i;

  RunResult<Real> result;
  result.stages.reserve(cfg.stages + 1);
  std::vector<NodeId> l_s = data.split.train;
  std::vector<NodeId> confident;
  std::size_t confident_count = 0;

  for (int s = 0; s <= cfg.stages; ++s) {
    const Matrix<Real>* pseudo = nullptr;
    if (s >= 1) {
      const StageState<Real>& prev = result.stages.back();
      confident =
          filter_confident(prev.y_soft, cfg.threshold, data.task, all_nodes);
      confident_count = confident.size();
      l_s = enhance_training_set(data.split.train, confident);
      pseudo = &prev.y_hard01;
    }

    const bool with_label =
        cfg.use_label_model && (s > 0 || plan.label_model_at_stage0);
    Matrix<Real> label_infer;
    Matrix<Real> label_train;
    if (with_label) {
      StageLabelState<Real> ls;
      ls.stage = s;
      ls.hard_pseudo = pseudo;
      ls.enhanced = l_s;
      ls.raw_train = data.split.train;
      ls.task = data.task;
      ls.filter_raw_train =
          plan.inductive && cfg.inductive_filter_train_labels && s > 0;
      ls.confident = &confident;
      const Matrix<Real> y0 = init_label_embedding(ls, y_true);
      label_infer = propagate_labels(t_full, y0, cfg.k_l, cfg.threads);
      if (plan.inductive) {
        // raw-train rows propagate labels inside the train graph only
        Matrix<Real> y0_sub = y0.take_rows(train_sub.new_to_old);
        Matrix<Real> z_sub =
            propagate_labels(t_train, y0_sub, cfg.k_l, cfg.threads);
        label_train = label_infer;
        for (std::size_t r = 0; r < train_sub.new_to_old.size(); ++r) {
          const NodeId old_id = train_sub.new_to_old[r];
          for (std::size_t c = 0; c < label_train.cols; ++c) {
            label_train(old_id, c) = z_sub(r, c);
          }
        }
      } else {
        label_train = label_infer;
      }
    }

    StageInputs<Real> si;
    si.data = &data;
    si.train_hops = &batch_hops;
    si.infer_hops = &hops_full;
    si.label_train = with_label ? &label_train : nullptr;
    si.label_infer = with_label ? &label_infer : nullptr;
    si.l_s = l_s;
    si.pseudo_hard = pseudo;
    si.stage = s;
    si.confident_count = confident_count;
    result.stages.push_back(train_stage(si, cfg));
  }
  result.wall_ms = sw.ms();
  return result;
}

}  // namespace sagn
