#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sagn/graph.hpp"
#include "sagn/graph_io.hpp"
#include "sagn/label_model.hpp"
#include "sagn/matrix.hpp"

namespace sagn {

template <typename Real>
struct Dataset {
  std::string name;
  Graph graph;
  Matrix<Real> features;
  TaskKind task = TaskKind::SingleLabel;
  std::size_t num_classes = 0;
  std::vector<std::int32_t> labels;  // single-label class ids, length N
  Matrix<Real> labels_multi;         // multi-label N x C binary
  NodeSplit split;
  std::uint64_t content_hash = 0;

  NodeId num_nodes() const { return graph.num_nodes; }

  Matrix<Real> one_hot_labels() const {
    if (task == TaskKind::MultiLabel) return labels_multi;
    Matrix<Real> out(graph.num_nodes, num_classes);
    for (NodeId i = 0; i < graph.num_nodes; ++i) {
      out(i, labels[i]) = Real(1);
    }
    return out;
  }

  std::vector<int> label_ids_of(const std::vector<NodeId>& nodes) const {
    std::vector<int> out;
    out.reserve(nodes.size());
    for (NodeId i : nodes) out.push_back(labels[i]);
    return out;
  }

  void compute_hash() {
    Fnv1a h;
    h.update_pod(graph.content_hash());
    h.update_pod(features.content_hash());
    h.update_pod(static_cast<std::uint32_t>(task));
    h.update_pod(static_cast<std::uint64_t>(num_classes));
    h.update_vec(labels);
    h.update_pod(labels_multi.content_hash());
    h.update_vec(split.train);
    h.update_vec(split.valid);
    h.update_vec(split.test);
    h.update_pod(static_cast<std::uint32_t>(split.setting));
    content_hash = h.digest();
  }

  void validate() const {
    graph.validate();
    check_data(features.rows == graph.num_nodes, "Dataset: feature row count");
    if (task == TaskKind::SingleLabel) {
      check_data(labels.size() == graph.num_nodes, "Dataset: label count");
      for (auto l : labels) {
        check_data(l >= 0 && static_cast<std::size_t>(l) < num_classes,
                   "Dataset: label id out of range");
      }
    } else {
      check_data(labels_multi.rows == graph.num_nodes &&
                     labels_multi.cols == num_classes,
                 "Dataset: multi-label matrix shape");
    }
    split.validate(graph.num_nodes);
  }
};

// ---------------------------------------------------------------------------
// features.bin ("SGNF"): magic, version, N, d, dtype, row-major data.
// ---------------------------------------------------------------------------

template <typename Real>
void save_features(const Matrix<Real>& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  check_data(out.good(), "cannot write features: " + path);
  using namespace io_detail;
  write_bytes(out, "SGNF", 4);
  write_pod<std::uint32_t>(out, 1);
  write_pod<std::uint64_t>(out, m.rows);
  write_pod<std::uint64_t>(out, m.cols);
  write_pod<std::uint32_t>(out, dtype_code<Real>());
  write_vec(out, m.data);
  check_data(out.good(), "write failed: " + path);
}

template <typename Real>
Matrix<Real> load_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check_data(in.good(), "cannot open features: " + path);
  using namespace io_detail;
  char magic[4];
  read_bytes(in, magic, 4, "magic");
  check_data(std::memcmp(magic, "SGNF", 4) == 0,
             "not a feature file (bad magic): " + path);
  const auto version = read_pod<std::uint32_t>(in, "version");
  check_data(version == 1, "unsupported feature file version");
  Matrix<Real> m;
  m.rows = read_pod<std::uint64_t>(in, "rows");
  m.cols = read_pod<std::uint64_t>(in, "cols");
  const auto dtype = read_pod<std::uint32_t>(in, "dtype");
  check_data(dtype == dtype_code<Real>(), "feature dtype mismatch: " + path);
  read_vec(in, m.data, m.rows * m.cols, "feature data");
  return m;
}

// ---------------------------------------------------------------------------
// labels.tsv: "# classes=<C> task=single|multi" header, then one
// "node_id<TAB>label" (single) or "node_id<TAB>c1,c2,..." (multi) per node.
// ---------------------------------------------------------------------------

template <typename Real>
void save_labels(const Dataset<Real>& ds, const std::string& path) {
  std::ofstream out(path);
  check_data(out.good(), "cannot write labels: " + path);
  out << "# classes=" << ds.num_classes << " task=" << to_string(ds.task)
      << "\n";
  for (NodeId i = 0; i < ds.graph.num_nodes; ++i) {
    out << i << '\t';
    if (ds.task == TaskKind::SingleLabel) {
      out << ds.labels[i];
    } else {
      bool first = true;
      for (std::size_t c = 0; c < ds.num_classes; ++c) {
        if (ds.labels_multi(i, c) > Real(0.5)) {
          if (!first) out << ',';
          out << c;
          first = false;
        }
      }
    }
    out << '\n';
  }
}

template <typename Real>
void load_labels(Dataset<Real>& ds, const std::string& path) {
  std::ifstream in(path);
  check_data(in.good(), "cannot open labels: " + path);
  std::string line;
  check_data(static_cast<bool>(std::getline(in, line)),
             path + ":1: missing header");
  std::size_t classes = 0;
  char task_buf[16] = {0};
  if (std::sscanf(line.c_str(), "# classes=%zu task=%15s", &classes,
                  task_buf) != 2) {
    throw data_error(path + ":1: bad header, want '# classes=C task=KIND'");
  }
  ds.num_classes = classes;
  ds.task = std::string(task_buf) == "multi" ? TaskKind::MultiLabel
                                             : TaskKind::SingleLabel;
  const NodeId n = ds.graph.num_nodes;
  if (ds.task == TaskKind::SingleLabel) {
    ds.labels.assign(n, -1);
  } else {
    ds.labels_multi.resize(n, classes);
  }
  std::size_t lineno = 1;
  std::size_t seen = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    long long id = -1;
    std::string rest;
    if (!(ss >> id >> rest) || id < 0 || id >= static_cast<long long>(n)) {
      throw data_error(path + ":" + std::to_string(lineno) +
                       ": bad node id");
    }
    if (ds.task == TaskKind::SingleLabel) {
      long long cls = -1;
      try {
        cls = std::stoll(rest);
      } catch (...) {
        cls = -1;
      }
      if (cls < 0 || cls >= static_cast<long long>(classes)) {
        throw data_error(path + ":" + std::to_string(lineno) +
                         ": class id out of range");
      }
      ds.labels[id] = static_cast<std::int32_t>(cls);
    } else {
      std::istringstream cs(rest);
      std::string tok;
      while (std::getline(cs, tok, ',')) {
        if (tok.empty()) continue;
        long long cls = -1;
        try {
          cls = std::stoll(tok);
        } catch (...) {
          cls = -1;
        }
        if (cls < 0 || cls >= static_cast<long long>(classes)) {
          throw data_error(path + ":" + std::to_string(lineno) +
                           ": class id out of range");
        }
        ds.labels_multi(id, cls) = Real(1);
      }
    }
    ++seen;
  }
  check_data(seen == n, path + ": expected one label line per node");
}

// ---------------------------------------------------------------------------
// split.json: explicit node-id arrays.
// ---------------------------------------------------------------------------

inline void save_split(const NodeSplit& split, const std::string& path) {
  nlohmann::json j;
  j["setting"] = split.setting == SplitSetting::Inductive ? "inductive"
                                                          : "transductive";
  j["train"] = split.train;
  j["valid"] = split.valid;
  j["test"] = split.test;
  std::ofstream out(path);
  check_data(out.good(), "cannot write split: " + path);
  out << j.dump(2) << "\n";
}

inline NodeSplit load_split(const std::string& path) {
  std::ifstream in(path);
  check_data(in.good(), "cannot open split: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw data_error(path + ": invalid JSON: " + e.what());
  }
  NodeSplit split;
  try {
    const std::string setting = j.at("setting").get<std::string>();
    check_data(setting == "transductive" || setting == "inductive",
               path + ": setting must be transductive or inductive");
    split.setting = setting == "inductive" ? SplitSetting::Inductive
                                           : SplitSetting::Transductive;
    split.train = j.at("train").get<std::vector<NodeId>>();
    split.valid = j.at("valid").get<std::vector<NodeId>>();
    split.test = j.at("test").get<std::vector<NodeId>>();
  } catch (const nlohmann::json::exception& e) {
    throw data_error(path + ": schema violation: " + e.what());
  }
  return split;
}

// ---------------------------------------------------------------------------
// Dataset directory: edges.tsv, features.bin, labels.tsv, split.json.
// ---------------------------------------------------------------------------

template <typename Real>
void save_dataset(const Dataset<Real>& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto p = [&](const char* f) {
    return (std::filesystem::path(dir) / f).string();
  };
  write_edge_list(ds.graph, p("edges.tsv"));
  save_features(ds.features, p("features.bin"));
  save_labels(ds, p("labels.tsv"));
  save_split(ds.split, p("split.json"));
}

template <typename Real>
Dataset<Real> load_dataset(const std::string& dir) {
  const auto p = [&](const char* f) {
    return (std::filesystem::path(dir) / f).string();
  };
  check_data(std::filesystem::is_directory(dir),
             "dataset directory not found: " + dir);
  Dataset<Real> ds;
  ds.name = std::filesystem::path(dir).filename().string();
  auto edges = read_edge_list(p("edges.tsv"));
  ds.features = load_features<Real>(p("features.bin"));
  const NodeId n = static_cast<NodeId>(ds.features.rows);
  ds.graph = build_csr(edges, n, false, false);
  load_labels(ds, p("labels.tsv"));
  ds.split = load_split(p("split.json"));
  if (ds.split.setting == SplitSetting::Inductive) {
    ds.split.train_graph = induced_subgraph(ds.graph, ds.split.train).graph;
  }
  ds.validate();
  ds.compute_hash();
  return ds;
}

}  // namespace sagn
