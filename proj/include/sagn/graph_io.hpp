#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sagn/graph.hpp"

namespace sagn {

// ---------------------------------------------------------------------------
// Edge-list text format: one "src<TAB>dst[<TAB>weight]" per line, '#' starts
// a comment line. See docs/FORMATS.md.
// ---------------------------------------------------------------------------

inline std::vector<Edge> read_edge_list(const std::string& path) {
  std::ifstream in(path);
  check_data(in.good(), "cannot open edge list: " + path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    long long src = -1, dst = -1;
    double w = 1.0;
    if (!(ss >> src >> dst)) {
      throw data_error(path + ":" + std::to_string(lineno) +
                       ": expected 'src dst [weight]'");
    }
    ss >> w;
    if (src < 0 || dst < 0) {
      throw data_error(path + ":" + std::to_string(lineno) +
                       ": negative node id");
    }
    edges.push_back({static_cast<NodeId>(src), static_cast<NodeId>(dst), w});
  }
  return edges;
}

inline void write_edge_list(const Graph& g, const std::string& path) {
  std::ofstream out(path);
  check_data(out.good(), "cannot write edge list: " + path);
  out << "# nodes=" << g.num_nodes << " edges=" << g.num_edges << "\n";
  for (NodeId i = 0; i < g.num_nodes; ++i) {
    for (EdgeId e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e) {
      out << i << '\t' << g.col_indices[e];
      if (g.edge_weights[e] != 1.0) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", g.edge_weights[e]);
        out << '\t' << buf;
      }
      out << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Binary CSR cache, magic "SGNC". Little-endian throughout (this code assumes
// a little-endian host). Layout in docs/FORMATS.md.
// ---------------------------------------------------------------------------

namespace io_detail {

inline void write_bytes(std::ofstream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::ifstream& in, void* p, std::size_t n,
                       const std::string& what) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  check_data(in.gcount() == static_cast<std::streamsize>(n),
             "truncated file while reading " + what);
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  write_bytes(out, &v, sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& what) {
  T v{};
  read_bytes(in, &v, sizeof(T), what);
  return v;
}

template <typename T>
void write_vec(std::ofstream& out, const std::vector<T>& v) {
  if (!v.empty()) write_bytes(out, v.data(), v.size() * sizeof(T));
}

template <typename T>
void read_vec(std::ifstream& in, std::vector<T>& v, std::size_t n,
              const std::string& what) {
  v.resize(n);
  if (n) read_bytes(in, v.data(), n * sizeof(T), what);
}

}  // namespace io_detail

inline void save_csr(const Graph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  check_data(out.good(), "cannot write CSR cache: " + path);
  using namespace io_detail;
  write_bytes(out, "SGNC", 4);
  write_pod<std::uint32_t>(out, 1);  // version
  write_pod<std::uint64_t>(out, g.num_nodes);
  write_pod<std::uint64_t>(out, g.num_edges);
  std::vector<std::uint64_t> offs(g.row_offsets.begin(), g.row_offsets.end());
  std::vector<std::uint64_t> cols(g.col_indices.begin(), g.col_indices.end());
  write_vec(out, offs);
  write_vec(out, cols);
  write_vec(out, g.edge_weights);
  check_data(out.good(), "write failed: " + path);
}

inline Graph load_csr(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check_data(in.good(), "cannot open CSR cache: " + path);
  using namespace io_detail;
  char magic[4];
  read_bytes(in, magic, 4, "magic");
  check_data(std::memcmp(magic, "SGNC", 4) == 0,
             "not a CSR cache (bad magic): " + path);
  const auto version = read_pod<std::uint32_t>(in, "version");
  check_data(version == 1, "unsupported CSR cache version");
  Graph g;
  const auto n = read_pod<std::uint64_t>(in, "num_nodes");
  const auto e = read_pod<std::uint64_t>(in, "num_edges");
  g.num_nodes = static_cast<NodeId>(n);
  g.num_edges = e;
  std::vector<std::uint64_t> offs, cols;
  read_vec(in, offs, n + 1, "row_offsets");
  read_vec(in, cols, e, "col_indices");
  read_vec(in, g.edge_weights, e, "edge_weights");
  g.row_offsets.assign(offs.begin(), offs.end());
  g.col_indices.reserve(cols.size());
  for (auto c : cols) g.col_indices.push_back(static_cast<NodeId>(c));
  g.validate();
  return g;
}

}  // namespace sagn
