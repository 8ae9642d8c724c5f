#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sagn/common.hpp"

namespace sagn {

using NodeId = std::uint32_t;
using EdgeId = std::uint64_t;

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  double weight = 1.0;
};

// Immutable sparse adjacency in canonical CSR form: within each row the
// column indices are strictly increasing, duplicates coalesced.
struct Graph {
  NodeId num_nodes = 0;
  EdgeId num_edges = 0;
  std::vector<EdgeId> row_offsets;   // length num_nodes + 1
  std::vector<NodeId> col_indices;   // length num_edges
  std::vector<double> edge_weights;  // length num_edges, default all 1

  EdgeId degree(NodeId i) const { return row_offsets[i + 1] - row_offsets[i]; }

  std::uint64_t content_hash() const {
    Fnv1a h;
    h.update_pod(static_cast<std::uint64_t>(num_nodes));
    h.update_pod(num_edges);
    h.update_vec(row_offsets);
    h.update_vec(col_indices);
    h.update_vec(edge_weights);
    return h.digest();
  }

  std::vector<Edge> to_edge_list() const {
    std::vector<Edge> edges;
    edges.reserve(num_edges);
    for (NodeId i = 0; i < num_nodes; ++i) {
      for (EdgeId e = row_offsets[i]; e < row_offsets[i + 1]; ++e) {
        edges.push_back({i, col_indices[e], edge_weights[e]});
      }
    }
    return edges;
  }

  void validate() const {
    check(row_offsets.size() == static_cast<std::size_t>(num_nodes) + 1,
          "Graph: row_offsets length mismatch");
    check(row_offsets.front() == 0 && row_offsets.back() == num_edges,
          "Graph: offset endpoints invalid");
    check(col_indices.size() == num_edges && edge_weights.size() == num_edges,
          "Graph: edge array length mismatch");
    for (NodeId i = 0; i < num_nodes; ++i) {
      check(row_offsets[i] <= row_offsets[i + 1],
            "Graph: row_offsets not non-decreasing");
      for (EdgeId e = row_offsets[i]; e < row_offsets[i + 1]; ++e) {
        check(col_indices[e] < num_nodes, "Graph: column index out of range");
        if (e > row_offsets[i]) {
          check(col_indices[e - 1] < col_indices[e],
                "Graph: columns not strictly increasing within row");
        }
      }
    }
  }
};

enum class TransitionKind { RowStochastic, Symmetric };

inline const char* to_string(TransitionKind k) {
  return k == TransitionKind::RowStochastic ? "row" : "sym";
}

inline TransitionKind transition_kind_from_string(const std::string& s) {
  if (s == "row" || s == "row_stochastic") return TransitionKind::RowStochastic;
  if (s == "sym" || s == "symmetric") return TransitionKind::Symmetric;
  throw usage_error("unknown transition kind: " + s);
}

// Normalized sparse operator over the same sparsity pattern as its source
// graph. Values are kept in double regardless of the model precision.
struct TransitionMatrix {
  NodeId num_nodes = 0;
  EdgeId num_edges = 0;
  std::vector<EdgeId> row_offsets;
  std::vector<NodeId> col_indices;
  std::vector<double> values;
  TransitionKind kind = TransitionKind::RowStochastic;
  bool self_loops = false;

  std::uint64_t content_hash() const {
    Fnv1a h;
    h.update_pod(static_cast<std::uint64_t>(num_nodes));
    h.update_pod(num_edges);
    h.update_vec(row_offsets);
    h.update_vec(col_indices);
    h.update_vec(values);
    h.update_pod(static_cast<std::uint32_t>(kind));
    h.update_pod(static_cast<std::uint8_t>(self_loops));
    return h.digest();
  }
};

enum class SplitSetting { Transductive, Inductive };

struct NodeSplit {
  std::vector<NodeId> train;
  std::vector<NodeId> valid;
  std::vector<NodeId> test;
  SplitSetting setting = SplitSetting::Transductive;
  std::optional<Graph> train_graph;  // inductive only

  void validate(NodeId num_nodes) const {
    std::vector<char> seen(num_nodes, 0);
    auto mark = [&](const std::vector<NodeId>& ids, const char* name) {
      for (NodeId id : ids) {
        check_data(id < num_nodes,
                   std::string("NodeSplit: ") + name + " id out of range");
        check_data(!seen[id], "NodeSplit: splits are not disjoint");
        seen[id] = 1;
      }
    };
    mark(train, "train");
    mark(valid, "valid");
    mark(test, "test");
    if (setting == SplitSetting::Inductive) {
      check_data(train_graph.has_value(),
                 "NodeSplit: inductive split requires train_graph");
    }
  }
};

// Builds a canonical CSR graph from an edge list. Duplicates coalesce by
// weight summation; symmetrize inserts the reverse of every input edge
// (dense A + A^T semantics, so self-loop weights double); add_self_loops
// inserts (i, i) with weight 1 for every node.
inline Graph build_csr(const std::vector<Edge>& edges, NodeId num_nodes,
                       bool symmetrize, bool add_self_loops) {
  check(num_nodes > 0, "build_csr: num_nodes must be positive");
  for (const Edge& e : edges) {
    check(e.src < num_nodes && e.dst < num_nodes,
          "build_csr: edge endpoint out of range");
  }

  std::vector<Edge> work;
  work.reserve(edges.size() * (symmetrize ? 2 : 1) +
               (add_self_loops ? num_nodes : 0));
  for (const Edge& e : edges) {
    work.push_back(e);
    if (symmetrize) work.push_back({e.dst, e.src, e.weight});
  }
  if (add_self_loops) {
    for (NodeId i = 0; i < num_nodes; ++i) work.push_back({i, i, 1.0});
  }
  std::sort(work.begin(), work.end(), [](const Edge& a, const Edge& b) {
    return a.src != b.src ? a.src < b.src : a.dst < b.dst;
  });

  Graph g;
  g.num_nodes = num_nodes;
  g.row_offsets.assign(num_nodes + 1, 0);
  g.col_indices.reserve(work.size());
  g.edge_weights.reserve(work.size());
  for (std::size_t i = 0; i < work.size();) {
    std::size_t j = i;
    double w = 0.0;
    while (j < work.size() && work[j].src == work[i].src &&
           work[j].dst == work[i].dst) {
      w += work[j].weight;
      ++j;
    }
    g.col_indices.push_back(work[i].dst);
    g.edge_weights.push_back(w);
    g.row_offsets[work[i].src + 1] += 1;
    i = j;
  }
  for (NodeId i = 0; i < num_nodes; ++i) {
    g.row_offsets[i + 1] += g.row_offsets[i];
  }
  g.num_edges = g.col_indices.size();
  return g;
}

inline Graph with_self_loops(const Graph& g) {
  return build_csr(g.to_edge_list(), g.num_nodes, false, true);
}

// RowStochastic: a_ij = w_ij / deg(i). Symmetric: a_ij = w_ij /
// sqrt(deg(i) * deg(j)). Degrees are weighted out-degrees; zero-degree rows
// (and, for Symmetric, zero-degree columns) yield zero entries.
inline TransitionMatrix normalize(const Graph& g, TransitionKind kind,
                                  bool self_loops_flag = false) {
  TransitionMatrix t;
  t.num_nodes = g.num_nodes;
  t.num_edges = g.num_edges;
  t.row_offsets = g.row_offsets;
  t.col_indices = g.col_indices;
  t.values.resize(g.num_edges);
  t.kind = kind;
  t.self_loops = self_loops_flag;

  std::vector<double> deg(g.num_nodes, 0.0);
  for (NodeId i = 0; i < g.num_nodes; ++i) {
    for (EdgeId e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e) {
      deg[i] += g.edge_weights[e];
    }
  }
  for (NodeId i = 0; i < g.num_nodes; ++i) {
    for (EdgeId e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e) {
      const NodeId j = g.col_indices[e];
      double v = 0.0;
      if (kind == TransitionKind::RowStochastic) {
        if (deg[i] > 0.0) v = g.edge_weights[e] / deg[i];
      } else {
        if (deg[i] > 0.0 && deg[j] > 0.0) {
          v = g.edge_weights[e] / std::sqrt(deg[i] * deg[j]);
        }
      }
      t.values[e] = v;
    }
  }
  return t;
}

struct InducedSubgraph {
  Graph graph;
  std::vector<NodeId> old_to_new;  // length N, kInvalidNode if excluded
  std::vector<NodeId> new_to_old;  // length |nodes|
};

constexpr NodeId kInvalidNode = static_cast<NodeId>(-1);

// Keeps exactly the intra-set edges; new ids follow ascending old ids.
inline InducedSubgraph induced_subgraph(const Graph& g,
                                        const std::vector<NodeId>& nodes) {
  check(!nodes.empty(), "induced_subgraph: empty node set");
  InducedSubgraph out;
  out.new_to_old = nodes;
  std::sort(out.new_to_old.begin(), out.new_to_old.end());
  out.new_to_old.erase(
      std::unique(out.new_to_old.begin(), out.new_to_old.end()),
      out.new_to_old.end());
  check(out.new_to_old.back() < g.num_nodes,
        "induced_subgraph: node id out of range");

  out.old_to_new.assign(g.num_nodes, kInvalidNode);
  for (std::size_t i = 0; i < out.new_to_old.size(); ++i) {
    out.old_to_new[out.new_to_old[i]] = static_cast<NodeId>(i);
  }

  const NodeId n = static_cast<NodeId>(out.new_to_old.size());
  Graph& sub = out.graph;
  sub.num_nodes = n;
  sub.row_offsets.assign(n + 1, 0);
  for (NodeId ni = 0; ni < n; ++ni) {
    const NodeId oi = out.new_to_old[ni];
    for (EdgeId e = g.row_offsets[oi]; e < g.row_offsets[oi + 1]; ++e) {
      if (out.old_to_new[g.col_indices[e]] != kInvalidNode) {
        sub.col_indices.push_back(out.old_to_new[g.col_indices[e]]);
        sub.edge_weights.push_back(g.edge_weights[e]);
        sub.row_offsets[ni + 1] += 1;
      }
    }
  }
  for (NodeId i = 0; i < n; ++i) sub.row_offsets[i + 1] += sub.row_offsets[i];
  sub.num_edges = sub.col_indices.size();
  return out;
}

}  // namespace sagn
