#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sagn/graph.hpp"
#include "sagn/graph_io.hpp"
#include "test_helpers.hpp"

using namespace sagn;
using namespace testutil;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void expect_matches_dense(const Graph& g, const Dense& a) {
  REQUIRE(g.num_nodes == a.size());
  Dense got = dense_from_graph(g);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      REQUIRE(got[i][j] == Catch::Approx(a[i][j]).margin(1e-12));
    }
  }
}

}  // namespace

TEST_CASE("build_csr: single undirected edge", "[graph]") {
  Graph g = build_csr({{0, 1, 1.0}}, 2, true, false);
  REQUIRE(g.num_edges == 2);
  REQUIRE(g.col_indices == std::vector<NodeId>{1, 0});
  REQUIRE(g.row_offsets == std::vector<EdgeId>{0, 1, 2});
  g.validate();
}

TEST_CASE("build_csr: empty graph with self loops is identity", "[graph]") {
  Graph g = build_csr({}, 3, false, true);
  REQUIRE(g.num_edges == 3);
  for (NodeId i = 0; i < 3; ++i) {
    REQUIRE(g.degree(i) == 1);
    REQUIRE(g.col_indices[g.row_offsets[i]] == i);
    REQUIRE(g.edge_weights[g.row_offsets[i]] == 1.0);
  }
}

TEST_CASE("build_csr: duplicates coalesce by weight sum", "[graph]") {
  std::vector<Edge> edges = {{0, 1, 1.0}, {0, 1, 1.0}, {1, 2, 1.0}};
  Graph g = build_csr(edges, 3, true, false);
  expect_matches_dense(g, dense_from_edges(edges, 3, true, false));
}

TEST_CASE("build_csr: random graphs match dense accumulation oracle",
          "[graph]") {
  Rng rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    const NodeId n = 2 + static_cast<NodeId>(rng.below(30));
    auto edges = random_edges(rng, n, 0.2, true);
    const bool sym = rng.uniform() < 0.5;
    const bool loops = rng.uniform() < 0.5;
    Graph g = build_csr(edges, n, sym, loops);
    g.validate();
    expect_matches_dense(g, dense_from_edges(edges, n, sym, loops));
  }
}

TEST_CASE("build_csr: rejects bad input", "[graph]") {
  REQUIRE_THROWS_AS(build_csr({{0, 5, 1.0}}, 3, false, false),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(build_csr({}, 0, false, false), std::invalid_argument);
}

TEST_CASE("build_csr: rebuilding from emitted edges is identical", "[graph]") {
  Rng rng(7);
  auto edges = random_edges(rng, 12, 0.3, true);
  Graph g = build_csr(edges, 12, true, true);
  Graph g2 = build_csr(g.to_edge_list(), 12, false, false);
  REQUIRE(g2.row_offsets == g.row_offsets);
  REQUIRE(g2.col_indices == g.col_indices);
  REQUIRE(g2.edge_weights == g.edge_weights);
}

TEST_CASE("normalize: two-node edge row-stochastic", "[graph]") {
  Graph g = build_csr({{0, 1, 1.0}}, 2, true, false);
  TransitionMatrix t = normalize(g, TransitionKind::RowStochastic);
  REQUIRE(t.values == std::vector<double>{1.0, 1.0});
}

TEST_CASE("normalize: path graph symmetric matches dense oracle", "[graph]") {
  Graph g = build_csr({{0, 1, 1.0}, {1, 2, 1.0}}, 3, true, false);
  TransitionMatrix t = normalize(g, TransitionKind::Symmetric);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  REQUIRE(t.values.size() == 4);
  for (double v : t.values) REQUIRE(v == Catch::Approx(inv_sqrt2));

  Dense oracle = dense_normalize(dense_from_graph(g), TransitionKind::Symmetric);
  for (NodeId i = 0; i < 3; ++i) {
    for (EdgeId e = t.row_offsets[i]; e < t.row_offsets[i + 1]; ++e) {
      REQUIRE(t.values[e] ==
              Catch::Approx(oracle[i][t.col_indices[e]]).margin(1e-12));
    }
  }
}

TEST_CASE("normalize: isolated node yields zero row", "[graph]") {
  Graph g = build_csr({{0, 1, 1.0}}, 3, true, false);
  TransitionMatrix t = normalize(g, TransitionKind::RowStochastic);
  REQUIRE(t.row_offsets[2] == t.row_offsets[3]);  // no entries at all
  t = normalize(g, TransitionKind::Symmetric);
  REQUIRE(t.row_offsets[2] == t.row_offsets[3]);
}

TEST_CASE("normalize: row sums are 1 for non-isolated rows", "[graph]") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const NodeId n = 2 + static_cast<NodeId>(rng.below(40));
    Graph g = build_csr(random_edges(rng, n, 0.15, true), n, true,
                        rng.uniform() < 0.5);
    TransitionMatrix t = normalize(g, TransitionKind::RowStochastic);
    for (NodeId i = 0; i < n; ++i) {
      double sum = 0.0;
      for (EdgeId e = t.row_offsets[i]; e < t.row_offsets[i + 1]; ++e) {
        REQUIRE(t.values[e] >= 0.0);
        sum += t.values[e];
      }
      if (g.degree(i) > 0) REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
    }
  }
}

TEST_CASE("normalize: symmetric kind is entrywise symmetric", "[graph]") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const NodeId n = 2 + static_cast<NodeId>(rng.below(30));
    Graph g = build_csr(random_edges(rng, n, 0.2, true), n, true, false);
    TransitionMatrix t = normalize(g, TransitionKind::Symmetric);
    Dense d(n, std::vector<double>(n, 0.0));
    for (NodeId i = 0; i < n; ++i) {
      for (EdgeId e = t.row_offsets[i]; e < t.row_offsets[i + 1]; ++e) {
        d[i][t.col_indices[e]] = t.values[e];
      }
    }
    for (NodeId i = 0; i < n; ++i) {
      for (NodeId j = 0; j < n; ++j) {
        REQUIRE(std::abs(d[i][j] - d[j][i]) < 1e-12);
      }
    }
  }
}

TEST_CASE("induced_subgraph: triangle restricted to an edge", "[graph]") {
  Graph g = build_csr({{0, 1, 1}, {1, 2, 1}, {0, 2, 1}}, 3, true, false);
  auto sub = induced_subgraph(g, {0, 1});
  REQUIRE(sub.graph.num_nodes == 2);
  REQUIRE(sub.graph.num_edges == 2);  // both directions
  REQUIRE(sub.new_to_old == std::vector<NodeId>{0, 1});
}

TEST_CASE("induced_subgraph: star leaves share no edges", "[graph]") {
  Graph g = build_csr({{0, 1, 1}, {0, 2, 1}, {0, 3, 1}}, 4, true, false);
  auto sub = induced_subgraph(g, {1, 2, 3});
  REQUIRE(sub.graph.num_nodes == 3);
  REQUIRE(sub.graph.num_edges == 0);
}

TEST_CASE("induced_subgraph: matches dense masking oracle", "[graph]") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const NodeId n = 5 + static_cast<NodeId>(rng.below(45));
    Graph g = build_csr(random_edges(rng, n, 0.2, true), n, false, false);
    std::vector<NodeId> nodes;
    for (NodeId i = 0; i < n; ++i) {
      if (rng.uniform() < 0.5) nodes.push_back(i);
    }
    if (nodes.empty()) nodes.push_back(0);
    auto sub = induced_subgraph(g, nodes);

    Dense full = dense_from_graph(g);
    Dense got = dense_from_graph(sub.graph);
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      for (std::size_t b = 0; b < nodes.size(); ++b) {
        REQUIRE(got[a][b] == full[nodes[a]][nodes[b]]);
      }
    }
    // mapping is a bijection onto 0..|nodes|-1
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      REQUIRE(sub.old_to_new[nodes[a]] == a);
    }
  }
}

TEST_CASE("induced_subgraph: empty node set is an error", "[graph]") {
  Graph g = build_csr({{0, 1, 1}}, 2, true, false);
  REQUIRE_THROWS_AS(induced_subgraph(g, {}), std::invalid_argument);
}

TEST_CASE("edge list file round trip", "[graph]") {
  const std::string path = temp_path("sagn_test_edges.tsv");
  Rng rng(3);
  Graph g = build_csr(random_edges(rng, 15, 0.2, true), 15, true, false);
  write_edge_list(g, path);
  Graph g2 = build_csr(read_edge_list(path), 15, false, false);
  REQUIRE(g2.row_offsets == g.row_offsets);
  REQUIRE(g2.col_indices == g.col_indices);
  REQUIRE(g2.edge_weights == g.edge_weights);
  std::remove(path.c_str());
}

TEST_CASE("edge list parser reports file and line", "[graph]") {
  const std::string path = temp_path("sagn_test_bad_edges.tsv");
  {
    std::ofstream out(path);
    out << "# comment\n0\t1\nnot-a-number\n";
  }
  try {
    read_edge_list(path);
    FAIL("expected data_error");
  } catch (const data_error& e) {
    REQUIRE(std::string(e.what()).find(":3") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("binary CSR cache round trip and bad magic", "[graph]") {
  const std::string path = temp_path("sagn_test_graph.sgnc");
  Rng rng(5);
  Graph g = build_csr(random_edges(rng, 20, 0.2, true), 20, true, true);
  save_csr(g, path);
  Graph g2 = load_csr(path);
  REQUIRE(g2.num_nodes == g.num_nodes);
  REQUIRE(g2.row_offsets == g.row_offsets);
  REQUIRE(g2.col_indices == g.col_indices);
  REQUIRE(g2.edge_weights == g.edge_weights);
  REQUIRE(g2.content_hash() == g.content_hash());

  {
    std::ofstream out(path, std::ios::binary);
    out << "JUNKJUNKJUNK";
  }
  REQUIRE_THROWS_AS(load_csr(path), data_error);
  std::remove(path.c_str());
}

TEST_CASE("node split validation", "[graph]") {
  NodeSplit split;
  split.train = {0, 1};
  split.valid = {2};
  split.test = {3};
  split.validate(4);

  split.valid.push_back(0);
  REQUIRE_THROWS_AS(split.validate(4), data_error);

  split.valid = {9};
  REQUIRE_THROWS_AS(split.validate(4), data_error);

  split.valid = {2};
  split.setting = SplitSetting::Inductive;
  REQUIRE_THROWS_AS(split.validate(4), data_error);
}
