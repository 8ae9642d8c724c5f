#include <catch2/catch_amalgamated.hpp>

#include "sagn/sbm.hpp"
#include "sagn/sle.hpp"
#include "test_helpers.hpp"

using namespace sagn;
using namespace testutil;

namespace {

// Small, well-separated benchmark that trains in a couple of seconds.
Dataset<float> tiny_sbm(std::uint64_t seed, NodeId n = 60) {
  SbmSpec spec;
  spec.num_nodes = n;
  spec.num_classes = 3;
  spec.intra_p = 0.3;
  spec.inter_p = 0.02;
  spec.feature_dim = 8;
  spec.feature_noise_sigma = 0.4;
  spec.label_homophily = 0.95;
  spec.train_frac = 0.4;
  spec.valid_frac = 0.2;
  spec.seed = seed;
  return generate_sbm<float>(spec);
}

SleConfig tiny_sle_config() {
  SleConfig cfg;
  cfg.hidden_dim = 16;
  cfg.num_layers = 2;
  cfg.k_f = 2;
  cfg.k_l = 4;
  cfg.dropout = 0.1;
  cfg.attention_dropout = 0.0;
  cfg.input_dropout = 0.0;
  cfg.stages = 0;
  cfg.epochs = {200};
  cfg.lr = 1e-2;
  cfg.batch_size = 1024;
  cfg.eval_interval = 20;
  cfg.seed = 0;
  return cfg;
}

}  // namespace

TEST_CASE("filter_confident: degenerate zero threshold keeps everything",
          "[sle]") {
  Matrix<float> y(3, 2);
  y(0, 0) = 0.5f;
  y(0, 1) = 0.5f;
  y(1, 0) = 0.9f;
  y(1, 1) = 0.1f;
  y(2, 0) = 0.2f;
  y(2, 1) = 0.8f;
  std::vector<NodeId> eligible = {0, 1, 2};
  auto out = filter_confident(y, 0.0, TaskKind::SingleLabel, eligible);
  REQUIRE(out == eligible);
}

TEST_CASE("filter_confident: direct two-row case", "[sle]") {
  Matrix<float> y(2, 2);
  y(0, 0) = 0.95f;
  y(0, 1) = 0.05f;
  y(1, 0) = 0.6f;
  y(1, 1) = 0.4f;
  auto out = filter_confident(y, 0.9, TaskKind::SingleLabel, {0, 1});
  REQUIRE(out == std::vector<NodeId>{0});
}

TEST_CASE("filter_confident: matches brute-force row scan", "[sle]") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 50;
    const std::size_t C = 4;
    Matrix<float> y(n, C);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        y(i, c) = static_cast<float>(rng.uniform());
        sum += y(i, c);
      }
      for (std::size_t c = 0; c < C; ++c) {
        y(i, c) = static_cast<float>(y(i, c) / sum);
      }
    }
    std::vector<NodeId> eligible;
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.uniform() < 0.7) eligible.push_back(static_cast<NodeId>(i));
    }
    const double beta = 0.5;
    auto got = filter_confident(y, beta, TaskKind::SingleLabel, eligible);

    std::vector<NodeId> want;
    for (NodeId i : eligible) {
      float mx = 0.0f;
      for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, y(i, c));
      if (mx >= beta) want.push_back(i);
    }
    REQUIRE(got == want);
  }
}

TEST_CASE("filter_confident: multi-label mean entropy threshold", "[sle]") {
  Rng rng(2);
  const std::size_t n = 40, C = 5;
  Matrix<float> y(n, C);
  for (auto& v : y.data) v = static_cast<float>(rng.uniform(0.001, 0.999));
  std::vector<NodeId> eligible;
  for (std::size_t i = 0; i < n; ++i) eligible.push_back(i);
  const double tau = 0.4;
  auto got = filter_confident(y, tau, TaskKind::MultiLabel, eligible);

  std::vector<NodeId> want;
  for (std::size_t i = 0; i < n; ++i) {
    double h = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double p = y(i, c);
      h -= p * std::log(p) + (1 - p) * std::log(1 - p);
    }
    if (h / C < tau) want.push_back(static_cast<NodeId>(i));
  }
  REQUIRE(got == want);
}

TEST_CASE("enhance_training_set: union semantics", "[sle]") {
  REQUIRE(enhance_training_set({1, 3, 5}, {}) == std::vector<NodeId>{1, 3, 5});
  REQUIRE(enhance_training_set({1, 3}, {1, 2, 3, 4}) ==
          std::vector<NodeId>{1, 2, 3, 4});
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<NodeId> l0 = {0}, conf;
    std::vector<char> in_l0(100, 0), in_conf(100, 0);
    in_l0[0] = 1;
    for (NodeId i = 1; i < 100; ++i) {
      if (rng.uniform() < 0.2) {
        l0.push_back(i);
        in_l0[i] = 1;
      }
    }
    for (NodeId i = 0; i < 100; ++i) {
      if (rng.uniform() < 0.3) {
        conf.push_back(i);
        in_conf[i] = 1;
      }
    }
    auto got = enhance_training_set(l0, conf);
    std::vector<NodeId> want;
    for (NodeId i = 0; i < 100; ++i) {
      if (in_l0[i] || in_conf[i]) want.push_back(i);
    }
    REQUIRE(got == want);
    REQUIRE(got.size() >= l0.size());
    for (NodeId i : l0) {
      REQUIRE(std::binary_search(got.begin(), got.end(), i));
    }
  }
}

TEST_CASE("stage_loss: perfect predictions have near-zero loss", "[sle]") {
  Matrix<double> y_true(3, 2);
  y_true(0, 0) = 1;
  y_true(1, 1) = 1;
  y_true(2, 0) = 1;
  Matrix<double> logits(3, 2);
  logits(0, 0) = 50;
  logits(1, 1) = 50;
  logits(2, 0) = 50;
  std::vector<std::uint8_t> in_l0 = {1, 1, 1};
  std::vector<std::uint8_t> in_ls = {1, 1, 1};
  Matrix<double> d;
  const double loss = stage_loss<double>(logits, std::vector<NodeId>{0, 1, 2}, y_true, nullptr, in_l0,
                                 in_ls, TaskKind::SingleLabel, d);
  REQUIRE(loss < 1e-9);
}

TEST_CASE("stage_loss: uniform predictions give log C", "[sle]") {
  const std::size_t C = 5;
  Matrix<double> y_true(2, C);
  y_true(0, 1) = 1;
  y_true(1, 3) = 1;
  Matrix<double> logits(2, C, 0.7);  // constant logits = uniform probs
  std::vector<std::uint8_t> ones = {1, 1};
  Matrix<double> d;
  const double loss = stage_loss<double>(logits, std::vector<NodeId>{0, 1}, y_true, nullptr, ones, ones,
                                 TaskKind::SingleLabel, d);
  REQUIRE(loss == Catch::Approx(std::log(static_cast<double>(C))).margin(1e-9));
}

TEST_CASE("stage_loss: matches a scalar reference with mixed targets",
          "[sle]") {
  Rng rng(4);
  const std::size_t n = 12, C = 3;
  Matrix<double> y_true(n, C);
  Matrix<double> pseudo(n, C);
  for (std::size_t i = 0; i < n; ++i) {
    y_true(i, rng.below(C)) = 1.0;
    pseudo(i, rng.below(C)) = 1.0;
  }
  std::vector<std::uint8_t> in_l0(n, 0), in_ls(n, 0);
  std::vector<NodeId> batch;
  for (std::size_t i = 0; i < n; ++i) {
    in_l0[i] = rng.uniform() < 0.5;
    in_ls[i] = 1;
    batch.push_back(static_cast<NodeId>(i));
  }
  auto logits = random_matrix<double>(rng, n, C, -2.0, 2.0);
  Matrix<double> d;
  const double got = stage_loss(logits, batch, y_true, &pseudo, in_l0, in_ls,
                                TaskKind::SingleLabel, d);

  // scalar reference: softmax then pick the target class per node
  double want = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits(i, 0);
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, logits(i, c));
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) z += std::exp(logits(i, c) - mx);
    const Matrix<double>& target = in_l0[i] ? y_true : pseudo;
    for (std::size_t c = 0; c < C; ++c) {
      if (target(i, c) > 0) {
        want -= std::log(std::exp(logits(i, c) - mx) / z);
      }
    }
  }
  want /= static_cast<double>(n);
  REQUIRE(got == Catch::Approx(want).margin(1e-7));
}

TEST_CASE("stage_loss: batch node outside the enhanced set is an error",
          "[sle]") {
  Matrix<double> y_true(2, 2);
  y_true(0, 0) = 1;
  y_true(1, 1) = 1;
  Matrix<double> logits(2, 2);
  std::vector<std::uint8_t> in_l0 = {1, 0};
  std::vector<std::uint8_t> in_ls = {1, 0};  // node 1 not in L_s
  Matrix<double> d;
  REQUIRE_THROWS_AS(stage_loss<double>(logits, std::vector<NodeId>{0, 1}, y_true, nullptr, in_l0, in_ls,
                               TaskKind::SingleLabel, d),
                    std::invalid_argument);
}

TEST_CASE("make_batches: trailing singleton merges into the previous batch",
          "[sle]") {
  std::vector<NodeId> order = {4, 1, 3, 0, 2};
  auto batches = make_batches(order, 2);
  REQUIRE(batches.size() == 2);
  REQUIRE(batches[0] == std::vector<NodeId>{4, 1});
  REQUIRE(batches[1] == std::vector<NodeId>{3, 0, 2});

  auto single = make_batches({7}, 4);
  REQUIRE(single.size() == 1);
  REQUIRE(single[0] == std::vector<NodeId>{7});
}

TEST_CASE("argmax tie-break picks the lowest class", "[sle]") {
  Matrix<float> y(2, 4);
  y(0, 1) = 0.4f;
  y(0, 3) = 0.4f;  // tie between 1 and 3
  y(1, 0) = 0.25f;
  y(1, 1) = 0.25f;
  y(1, 2) = 0.25f;
  y(1, 3) = 0.25f;  // full tie
  auto ids = argmax_rows(y);
  REQUIRE(ids[0] == 1);
  REQUIRE(ids[1] == 0);
}

TEST_CASE("train_stage: separable benchmark reaches high train accuracy",
          "[sle]") {
  auto data = tiny_sbm(7);
  SleConfig cfg = tiny_sle_config();
  auto result = run_sle(data, cfg);
  REQUIRE(result.stages.size() == 1);
  REQUIRE(result.stages[0].train_at_best >= 0.95);
}

TEST_CASE("run_sle: identical seeds give bit-identical soft labels", "[sle]") {
  auto data = tiny_sbm(11);
  SleConfig cfg = tiny_sle_config();
  cfg.epochs = {60};
  cfg.dropout = 0.3;  // make sure RNG paths are exercised
  auto a = run_sle(data, cfg);
  auto b = run_sle(data, cfg);
  REQUIRE(a.stages[0].y_soft == b.stages[0].y_soft);
  REQUIRE(a.stages[0].y_hard == b.stages[0].y_hard);
}

TEST_CASE("run_sle: near-degenerate threshold reduces to a stage-0 retrain",
          "[sle]") {
  auto data = tiny_sbm(13);
  SleConfig cfg = tiny_sle_config();
  cfg.epochs = {120, 120};
  cfg.stages = 1;
  cfg.threshold = 0.999999;
  cfg.use_label_model = false;
  auto result = run_sle(data, cfg);
  REQUIRE(result.stages.size() == 2);
  // few (often zero) confident nodes, so L_1 stays close to L_0
  const auto l0 = data.split.train.size();
  REQUIRE(result.stages[1].l_s.size() >= l0);
  REQUIRE(result.stages[1].l_s.size() <= l0 + data.num_nodes() / 10);
  REQUIRE(std::abs(result.stages[1].test_at_best -
                   result.stages[0].test_at_best) < 0.15);
}

TEST_CASE("run_sle: containment L_0 within L_s at every stage", "[sle]") {
  auto data = tiny_sbm(17);
  SleConfig cfg = tiny_sle_config();
  cfg.epochs = {80, 40, 40};
  cfg.stages = 2;
  cfg.threshold = 0.8;
  auto result = run_sle(data, cfg);
  REQUIRE(result.stages.size() == 3);
  for (const auto& st : result.stages) {
    for (NodeId i : data.split.train) {
      REQUIRE(std::binary_search(st.l_s.begin(), st.l_s.end(), i));
    }
    // L_s and U_s partition the node set
    REQUIRE(st.l_s.size() + st.u_s.size() == data.num_nodes());
    // hard labels are the argmax of soft labels
    auto expect = argmax_rows(st.y_soft);
    REQUIRE(st.y_hard == expect);
  }
  // confident sets were actually drawn from all nodes: stage 1 grew
  REQUIRE(result.stages[1].l_s.size() > data.split.train.size());
}

TEST_CASE("run_sle: SE pipeline has no label parameters, SLE has them",
          "[sle]") {
  auto data = tiny_sbm(19);
  SleConfig cfg = tiny_sle_config();
  cfg.epochs = {40};

  cfg.use_label_model = false;
  auto se = run_sle(data, cfg);
  for (const auto& nt : se.stages[0].checkpoint) {
    REQUIRE(nt.name.rfind("label.", 0) != 0);
  }

  cfg.use_label_model = true;
  auto sle = run_sle(data, cfg);
  bool any_label = false;
  for (const auto& nt : sle.stages[0].checkpoint) {
    if (nt.name.rfind("label.", 0) == 0) any_label = true;
  }
  REQUIRE(any_label);
}

TEST_CASE("apply_inductive_rules: plans", "[sle]") {
  NodeSplit split;
  split.setting = SplitSetting::Transductive;
  auto plan = apply_inductive_rules(split);
  REQUIRE(!plan.inductive);
  REQUIRE(plan.label_model_at_stage0);

  split.setting = SplitSetting::Inductive;
  plan = apply_inductive_rules(split);
  REQUIRE(plan.inductive);
  REQUIRE(!plan.label_model_at_stage0);
}

TEST_CASE("inductive: stage-0 training ignores non-train features", "[sle]") {
  auto data = tiny_sbm(23, 80);
  make_inductive(data);
  SleConfig cfg = tiny_sle_config();
  cfg.epochs = {50};
  cfg.dropout = 0.2;

  auto clean = run_sle(data, cfg);

  // poison every non-train node's features
  auto poisoned = data;
  std::vector<std::uint8_t> in_train(data.num_nodes(), 0);
  for (NodeId i : data.split.train) in_train[i] = 1;
  for (NodeId i = 0; i < data.num_nodes(); ++i) {
    if (!in_train[i]) {
      for (std::size_t c = 0; c < poisoned.features.cols; ++c) {
        poisoned.features(i, c) = 1e6f;
      }
    }
  }
  poisoned.compute_hash();
  auto dirty = run_sle(poisoned, cfg);

  // the per-epoch training loss sequences are identical
  std::vector<double> clean_losses, dirty_losses;
  for (const auto& r : clean.stages[0].history) {
    if (r.split == "train" && r.metric == "loss") {
      clean_losses.push_back(r.value);
    }
  }
  for (const auto& r : dirty.stages[0].history) {
    if (r.split == "train" && r.metric == "loss") {
      dirty_losses.push_back(r.value);
    }
  }
  REQUIRE(clean_losses.size() == dirty_losses.size());
  REQUIRE(!clean_losses.empty());
  for (std::size_t i = 0; i < clean_losses.size(); ++i) {
    REQUIRE(std::abs(clean_losses[i] - dirty_losses[i]) <= 1e-12);
  }
}

TEST_CASE("run_sle: inductive run with stages and the label model", "[sle]") {
  auto data = tiny_sbm(29, 80);
  make_inductive(data);
  SleConfig cfg = tiny_sle_config();
  cfg.epochs = {60, 40};
  cfg.stages = 1;
  cfg.threshold = 0.8;
  cfg.use_label_model = true;
  cfg.inductive_filter_train_labels = true;
  auto result = run_sle(data, cfg);
  REQUIRE(result.stages.size() == 2);
  // stage 0 trained without the label model, stage 1 with it
  bool label0 = false, label1 = false;
  for (const auto& nt : result.stages[0].checkpoint) {
    if (nt.name.rfind("label.", 0) == 0) label0 = true;
  }
  for (const auto& nt : result.stages[1].checkpoint) {
    if (nt.name.rfind("label.", 0) == 0) label1 = true;
  }
  REQUIRE(!label0);
  REQUIRE(label1);
}

TEST_CASE("sle config validation", "[sle]") {
  SleConfig cfg = tiny_sle_config();
  cfg.stages = 1;
  cfg.threshold = 1.5;
  REQUIRE_THROWS_AS(cfg.validate(TaskKind::SingleLabel),
                    std::invalid_argument);
  cfg.threshold = 0.9;
  REQUIRE_THROWS_AS(cfg.validate(TaskKind::MultiLabel),
                    std::invalid_argument);  // above log 2
  cfg.threshold = 0.5;
  cfg.validate(TaskKind::MultiLabel);
}
