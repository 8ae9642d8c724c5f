#pragma once

#include <string>
#include <vector>

#include "sagn/dataset.hpp"

namespace sagn {

// Planted-community random graph used as the desk-scale homophilous
// benchmark. Communities are contiguous node blocks; a node's label matches
// its community with probability label_homophily, features are the label's
// class-mean axis plus Gaussian noise.
struct SbmSpec {
  NodeId num_nodes = 1000;
  std::size_t num_classes = 5;
  double intra_p = 0.02;
  double inter_p = 0.002;
  std::size_t feature_dim = 16;
  double feature_noise_sigma = 1.0;
  double label_homophily = 0.9;
  double train_frac = 0.10;  // default 10% / 2% / 88%
  double valid_frac = 0.02;
  std::uint64_t seed = 0;

  void validate() const {
    check(num_nodes >= 2, "SbmSpec: need at least 2 nodes");
    check(num_classes >= 2, "SbmSpec: need at least 2 classes");
    check(0.0 <= inter_p && inter_p < intra_p && intra_p <= 1.0,
          "SbmSpec: require 0 <= inter_p < intra_p <= 1");
    check(label_homophily >= 0.0 && label_homophily <= 1.0,
          "SbmSpec: homophily in [0,1]");
    check(train_frac > 0.0 && train_frac + valid_frac < 1.0,
          "SbmSpec: bad split fractions");
  }
};

namespace sbm_detail {

// Geometric gap sampling over a column range [j, hi) at inclusion
// probability p; appends hits to out.
inline void sample_segment(Rng& rng, double p, NodeId src, NodeId j, NodeId hi,
                           std::vector<Edge>& out) {
  if (p <= 0.0) return;
  if (p >= 1.0) {
    for (NodeId c = j; c < hi; ++c) out.push_back({src, c, 1.0});
    return;
  }
  const double log1mp = std::log1p(-p);
  double cursor = static_cast<double>(j);
  while (true) {
    double u = 0.0;
    while (u <= 0.0) u = rng.uniform();
    cursor += 1.0 + std::floor(std::log(u) / log1mp);
    if (cursor >= static_cast<double>(hi)) break;
    out.push_back({src, static_cast<NodeId>(cursor), 1.0});
  }
}

}  // namespace sbm_detail

template <typename Real>
Dataset<Real> generate_sbm(const SbmSpec& spec) {
  spec.validate();
  Rng rng(spec.seed * 0x9e3779b97f4a7c15ull + 0x3c79ac492ba7b653ull);
  const NodeId n = spec.num_nodes;
  const std::size_t C = spec.num_classes;

  auto community_of = [&](NodeId i) {
    return static_cast<std::size_t>(
        (static_cast<std::uint64_t>(i) * C) / n);
  };
  auto community_end = [&](std::size_t c) {
    // first node of community c+1
    NodeId e = n;
    for (NodeId i = 0; i < n; ++i) {
      if (community_of(i) > c) {
        e = i;
        break;
      }
    }
    return e;
  };
  std::vector<NodeId> block_end(C);
  for (std::size_t c = 0; c < C; ++c) block_end[c] = community_end(c);

  // edges over ordered pairs i < j, two probability segments per row
  std::vector<Edge> edges;
  for (NodeId i = 0; i < n; ++i) {
    const std::size_t c = community_of(i);
    const NodeId be = block_end[c];
    sbm_detail::sample_segment(rng, spec.intra_p, i, i + 1, be, edges);
    sbm_detail::sample_segment(rng, spec.inter_p, i, be, n, edges);
  }

  Dataset<Real> ds;
  ds.graph = build_csr(edges, n, true, false);
  ds.task = TaskKind::SingleLabel;
  ds.num_classes = C;

  ds.labels.resize(n);
  for (NodeId i = 0; i < n; ++i) {
    const std::size_t c = community_of(i);
    if (rng.uniform() < spec.label_homophily) {
      ds.labels[i] = static_cast<std::int32_t>(c);
    } else {
      std::size_t other = rng.below(C - 1);
      if (other >= c) ++other;
      ds.labels[i] = static_cast<std::int32_t>(other);
    }
  }

  ds.features.resize(n, spec.feature_dim);
  for (NodeId i = 0; i < n; ++i) {
    Real* row = ds.features.row(i);
    row[ds.labels[i] % spec.feature_dim] = Real(1);
    if (spec.feature_noise_sigma > 0.0) {
      for (std::size_t d = 0; d < spec.feature_dim; ++d) {
        row[d] += static_cast<Real>(spec.feature_noise_sigma * rng.normal());
      }
    }
  }

  std::vector<NodeId> order(n);
  for (NodeId i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  const std::size_t n_train =
      static_cast<std::size_t>(spec.train_frac * n + 0.5);
  const std::size_t n_valid =
      static_cast<std::size_t>(spec.valid_frac * n + 0.5);
  ds.split.train.assign(order.begin(), order.begin() + n_train);
  ds.split.valid.assign(order.begin() + n_train,
                        order.begin() + n_train + n_valid);
  ds.split.test.assign(order.begin() + n_train + n_valid, order.end());
  std::sort(ds.split.train.begin(), ds.split.train.end());
  std::sort(ds.split.valid.begin(), ds.split.valid.end());
  std::sort(ds.split.test.begin(), ds.split.test.end());
  ds.split.setting = SplitSetting::Transductive;

  ds.name = "sbm-n" + std::to_string(n) + "-c" + std::to_string(C) + "-s" +
            std::to_string(spec.seed);
  ds.validate();
  ds.compute_hash();
  return ds;
}

// Converts a transductive dataset into the inductive setting by attaching
// the induced train graph.
template <typename Real>
void make_inductive(Dataset<Real>& ds) {
  ds.split.setting = SplitSetting::Inductive;
  ds.split.train_graph = induced_subgraph(ds.graph, ds.split.train).graph;
  ds.compute_hash();
}

// Uniform random graph for throughput experiments: exactly `edges` sampled
// pairs before symmetrization and coalescing.
inline Graph random_graph(NodeId n, std::size_t edges, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Edge> list;
  list.reserve(edges);
  for (std::size_t e = 0; e < edges; ++e) {
    const NodeId u = static_cast<NodeId>(rng.below(n));
    NodeId v = static_cast<NodeId>(rng.below(n - 1));
    if (v >= u) ++v;
    list.push_back({u, v, 1.0});
  }
  return build_csr(list, n, true, true);
}

}  // namespace sagn
