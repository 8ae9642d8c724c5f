#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "sagn/graph.hpp"
#include "sagn/graph_io.hpp"
#include "sagn/matrix.hpp"

namespace sagn {

// Row-block size used to schedule SpMM work; each worker owns whole rows and
// one scratch accumulator of the output width.
constexpr std::size_t kDefaultSpmmRowBlock = 8192;

// out = t * m. Accumulates each output row in double and stores in Real.
// Reduction within a row follows ascending column index, so the result is
// identical for every thread count.
template <typename Real>
void spmm(const TransitionMatrix& t, const Matrix<Real>& m, Matrix<Real>& out,
          int threads = 1, std::size_t row_block = kDefaultSpmmRowBlock) {
  check(static_cast<std::size_t>(t.num_nodes) == m.rows,
        "spmm: operator/matrix shape mismatch");
  out.resize(t.num_nodes, m.cols);
  const std::size_t d = m.cols;
  if (row_block == 0) row_block = kDefaultSpmmRowBlock;

  auto run_rows = [&](std::size_t lo, std::size_t hi) {
    std::vector<double> acc(d);
    for (std::size_t blk = lo; blk < hi; blk += row_block) {
      const std::size_t end = std::min(hi, blk + row_block);
      for (std::size_t i = blk; i < end; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (EdgeId e = t.row_offsets[i]; e < t.row_offsets[i + 1]; ++e) {
          const double v = t.values[e];
          const Real* src = m.row(t.col_indices[e]);
          for (std::size_t j = 0; j < d; ++j) {
            acc[j] += v * static_cast<double>(src[j]);
          }
        }
        Real* dst = out.row(i);
        for (std::size_t j = 0; j < d; ++j) dst[j] = static_cast<Real>(acc[j]);
      }
    }
  };
  parallel_for(t.num_nodes, threads, run_rows);
}

// Stack of propagated feature matrices; hops[0] is the raw input, bit-exact.
template <typename Real>
struct HopFeatures {
  std::vector<Matrix<Real>> hops;
  int k_max = 0;
  TransitionKind transition_kind = TransitionKind::RowStochastic;

  const Matrix<Real>& operator[](std::size_t k) const { return hops[k]; }
};

// hops[k] = t * hops[k-1], computed iteratively.
template <typename Real>
HopFeatures<Real> propagate_features(const TransitionMatrix& t,
                                     const Matrix<Real>& x, int k_f,
                                     int threads = 1,
                                     std::size_t row_block =
                                         kDefaultSpmmRowBlock) {
  check(k_f >= 0, "propagate_features: k_f must be >= 0");
  HopFeatures<Real> hf;
  hf.k_max = k_f;
  hf.transition_kind = t.kind;
  hf.hops.resize(k_f + 1);
  hf.hops[0] = x;
  for (int k = 1; k <= k_f; ++k) {
    spmm(t, hf.hops[k - 1], hf.hops[k], threads, row_block);
  }
  return hf;
}

// Returns t^{k_l} * y0. Only the final hop feeds the label model, so the
// intermediates are dropped; use propagate_labels_trace to keep them.
template <typename Real>
Matrix<Real> propagate_labels(const TransitionMatrix& t, const Matrix<Real>& y0,
                              int k_l, int threads = 1) {
  check(k_l >= 1, "propagate_labels: k_l must be >= 1");
  Matrix<Real> cur = y0;
  Matrix<Real> next;
  for (int k = 0; k < k_l; ++k) {
    spmm(t, cur, next, threads);
    std::swap(cur, next);
  }
  return cur;
}

template <typename Real>
std::vector<Matrix<Real>> propagate_labels_trace(const TransitionMatrix& t,
                                                 const Matrix<Real>& y0,
                                                 int k_l, int threads = 1) {
  check(k_l >= 1, "propagate_labels_trace: k_l must be >= 1");
  std::vector<Matrix<Real>> steps(k_l + 1);
  steps[0] = y0;
  for (int k = 1; k <= k_l; ++k) spmm(t, steps[k - 1], steps[k], threads);
  return steps;
}

// ---------------------------------------------------------------------------
// Hop cache, magic "SGNH". The key ties the cache to the exact inputs that
// produced it; any mismatch is reported as a stale cache.
// ---------------------------------------------------------------------------

struct HopCacheKey {
  std::uint64_t graph_hash = 0;
  std::uint32_t transition_kind = 0;
  std::uint32_t k_max = 0;
  std::uint64_t num_nodes = 0;
  std::uint64_t dim = 0;
  std::uint32_t dtype = 0;  // 0 = f32, 1 = f64
  std::uint64_t feature_hash = 0;
};

template <typename Real>
HopCacheKey make_hop_cache_key(const TransitionMatrix& t,
                               const Matrix<Real>& x, int k_f) {
  HopCacheKey key;
  key.graph_hash = t.content_hash();
  key.transition_kind = static_cast<std::uint32_t>(t.kind);
  key.k_max = static_cast<std::uint32_t>(k_f);
  key.num_nodes = t.num_nodes;
  key.dim = x.cols;
  key.dtype = dtype_code<Real>();
  key.feature_hash = x.content_hash();
  return key;
}

template <typename Real>
void cache_hops(const HopFeatures<Real>& hf, const HopCacheKey& key,
                const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  check_data(out.good(), "cannot write hop cache: " + path);
  using namespace io_detail;
  write_bytes(out, "SGNH", 4);
  write_pod<std::uint32_t>(out, 1);
  write_pod(out, key.graph_hash);
  write_pod(out, key.transition_kind);
  write_pod(out, key.k_max);
  write_pod(out, key.num_nodes);
  write_pod(out, key.dim);
  write_pod(out, key.dtype);
  write_pod(out, key.feature_hash);
  for (const auto& m : hf.hops) write_vec(out, m.data);
  check_data(out.good(), "write failed: " + path);
}

template <typename Real>
HopFeatures<Real> load_hops(const HopCacheKey& expected,
                            const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check_data(in.good(), "cannot open hop cache: " + path);
  using namespace io_detail;
  char magic[4];
  read_bytes(in, magic, 4, "magic");
  check_data(std::memcmp(magic, "SGNH", 4) == 0,
             "not a hop cache (bad magic): " + path);
  const auto version = read_pod<std::uint32_t>(in, "version");
  check_data(version == 1, "unsupported hop cache version");
  HopCacheKey key;
  key.graph_hash = read_pod<std::uint64_t>(in, "graph_hash");
  key.transition_kind = read_pod<std::uint32_t>(in, "transition_kind");
  key.k_max = read_pod<std::uint32_t>(in, "k_max");
  key.num_nodes = read_pod<std::uint64_t>(in, "num_nodes");
  key.dim = read_pod<std::uint64_t>(in, "dim");
  key.dtype = read_pod<std::uint32_t>(in, "dtype");
  key.feature_hash = read_pod<std::uint64_t>(in, "feature_hash");
  if (key.graph_hash != expected.graph_hash ||
      key.transition_kind != expected.transition_kind ||
      key.k_max != expected.k_max || key.num_nodes != expected.num_nodes ||
      key.dim != expected.dim || key.dtype != expected.dtype ||
      key.feature_hash != expected.feature_hash) {
    throw stale_cache_error("hop cache key mismatch (stale cache): " + path);
  }
  HopFeatures<Real> hf;
  hf.k_max = static_cast<int>(key.k_max);
  hf.transition_kind = static_cast<TransitionKind>(key.transition_kind);
  hf.hops.resize(key.k_max + 1);
  for (auto& m : hf.hops) {
    m.rows = key.num_nodes;
    m.cols = key.dim;
    read_vec(in, m.data, key.num_nodes * key.dim, "hop matrix");
  }
  return hf;
}

}  // namespace sagn
