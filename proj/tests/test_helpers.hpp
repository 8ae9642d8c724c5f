#pragma once

// Shared oracles for the test suite: dense adjacency references, a dense
// matrix-power reference for propagation, and a central finite-difference
// gradient checker. These stay independent of the library's CSR/SpMM path.

#include <cmath>
#include <functional>
#include <vector>

#include "sagn/graph.hpp"
#include "sagn/matrix.hpp"

namespace testutil {

using sagn::Edge;
using sagn::Graph;
using sagn::Matrix;
using sagn::NodeId;

using Dense = std::vector<std::vector<double>>;

inline Dense dense_from_edges(const std::vector<Edge>& edges, NodeId n,
                              bool symmetrize, bool self_loops) {
  Dense a(n, std::vector<double>(n, 0.0));
  for (const auto& e : edges) {
    a[e.src][e.dst] += e.weight;
    if (symmetrize) a[e.dst][e.src] += e.weight;
  }
  if (self_loops) {
    for (NodeId i = 0; i < n; ++i) a[i][i] += 1.0;
  }
  return a;
}

inline Dense dense_from_graph(const Graph& g) {
  Dense a(g.num_nodes, std::vector<double>(g.num_nodes, 0.0));
  for (NodeId i = 0; i < g.num_nodes; ++i) {
    for (auto e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e) {
      a[i][g.col_indices[e]] += g.edge_weights[e];
    }
  }
  return a;
}

inline Dense dense_normalize(const Dense& a, sagn::TransitionKind kind) {
  const std::size_t n = a.size();
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) deg[i] += a[i][j];
  }
  Dense t(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (a[i][j] == 0.0) continue;
      if (kind == sagn::TransitionKind::RowStochastic) {
        if (deg[i] > 0.0) t[i][j] = a[i][j] / deg[i];
      } else if (deg[i] > 0.0 && deg[j] > 0.0) {
        t[i][j] = a[i][j] / std::sqrt(deg[i] * deg[j]);
      }
    }
  }
  return t;
}

// y = a * x for dense a and a column-major-agnostic row-major x.
template <typename Real>
Matrix<double> dense_apply(const Dense& a, const Matrix<Real>& x) {
  Matrix<double> y(a.size(), x.cols);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i].size(); ++k) {
      const double v = a[i][k];
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < x.cols; ++j) {
        y(i, j) += v * static_cast<double>(x(k, j));
      }
    }
  }
  return y;
}

template <typename Real>
Matrix<double> dense_power_apply(const Dense& a, const Matrix<Real>& x,
                                 int k) {
  Matrix<double> cur(x.rows, x.cols);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    cur.data[i] = static_cast<double>(x.data[i]);
  }
  for (int s = 0; s < k; ++s) cur = dense_apply(a, cur);
  return cur;
}

inline std::vector<Edge> random_edges(sagn::Rng& rng, NodeId n,
                                      double edge_prob,
                                      bool weighted = false) {
  std::vector<Edge> edges;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = 0; j < n; ++j) {
      if (i != j && rng.uniform() < edge_prob) {
        edges.push_back({i, j, weighted ? rng.uniform(0.5, 2.0) : 1.0});
      }
    }
  }
  return edges;
}

template <typename Real>
Matrix<Real> random_matrix(sagn::Rng& rng, std::size_t r, std::size_t c,
                           double lo = -1.0, double hi = 1.0) {
  Matrix<Real> m(r, c);
  for (auto& v : m.data) v = static_cast<Real>(rng.uniform(lo, hi));
  return m;
}

// Central finite differences on a scalar function of one tensor.
template <typename Real>
Matrix<Real> numeric_grad(const std::function<double()>& f, Matrix<Real>& x,
                          double eps = 1e-5) {
  Matrix<Real> g(x.rows, x.cols);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const Real orig = x.data[i];
    x.data[i] = orig + static_cast<Real>(eps);
    const double fp = f();
    x.data[i] = orig - static_cast<Real>(eps);
    const double fm = f();
    x.data[i] = orig;
    g.data[i] = static_cast<Real>((fp - fm) / (2.0 * eps));
  }
  return g;
}

// Relative error with an absolute floor: gradients that are truly ~0 (for
// example a linear bias cancelled by the following batchnorm) compare by
// absolute error instead of amplified FD noise.
inline double rel_err(double a, double b) {
  const double denom = std::max(std::abs(a) + std::abs(b), 1e-3);
  return std::abs(a - b) / denom;
}

template <typename Real>
double max_rel_err(const Matrix<Real>& a, const Matrix<Real>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    m = std::max(m, rel_err(static_cast<double>(a.data[i]),
                            static_cast<double>(b.data[i])));
  }
  return m;
}

}  // namespace testutil
