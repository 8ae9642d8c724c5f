#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sagn/config.hpp"
#include "sagn/sle.hpp"

namespace sagn {

// One JSON object per line: {stage, epoch, split, metric, value, wall_ms}.
inline std::string metrics_to_jsonl(const std::vector<MetricRecord>& records,
                                    bool include_wall = true) {
  std::ostringstream out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["stage"] = r.stage;
    j["epoch"] = r.epoch;
    j["split"] = r.split;
    j["metric"] = r.metric;
    j["value"] = r.value;
    if (include_wall) j["wall_ms"] = r.wall_ms;
    out << j.dump() << "\n";
  }
  return out.str();
}

inline void write_metrics_jsonl(const std::vector<MetricRecord>& records,
                                const std::string& path) {
  std::ofstream out(path);
  check_data(out.good(), "cannot write metrics: " + path);
  out << metrics_to_jsonl(records);
}

template <typename Real>
std::vector<MetricRecord> collect_history(const RunResult<Real>& result) {
  std::vector<MetricRecord> all;
  for (const auto& st : result.stages) {
    all.insert(all.end(), st.history.begin(), st.history.end());
  }
  return all;
}

// Everything needed to reproduce a run: config, seeds, input hashes.
inline nlohmann::ordered_json make_manifest(
    const Config& cfg, std::uint64_t seed, const std::string& dataset_name,
    std::uint64_t dataset_hash, const std::vector<std::string>& argv) {
  nlohmann::ordered_json m;
  m["dataset"] = dataset_name;
  m["dataset_hash"] = dataset_hash;
  m["seed"] = seed;
  m["config"] = cfg.entries();
  m["argv"] = argv;
  return m;
}

// Attention weights as CSV: node_id,hop_0,...,hop_K. Rows sum to 1.
template <typename Real>
void export_attention(SagnModel<Real>& model, const HopFeatures<Real>& hops,
                      const std::vector<NodeId>& nodes,
                      const std::string& path, int threads = 1) {
  check(model.config().variant == Variant::Attention,
        "export_attention: model variant has no attention weights");
  check(!nodes.empty(), "export_attention: empty node subset");
  BatchInput<Real> batch = make_batch(hops, nodes, Variant::Attention);
  Matrix<Real> theta = model.attention_weights(batch, threads);

  std::ofstream out(path);
  check_data(out.good(), "cannot write attention export: " + path);
  out << "node_id";
  for (int k = 0; k <= model.config().k_f; ++k) out << ",hop_" << k;
  out << "\n";
  char buf[64];
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    out << nodes[i];
    for (std::size_t k = 0; k < theta.cols; ++k) {
      std::snprintf(buf, sizeof(buf), "%.9g",
                    static_cast<double>(theta(i, k)));
      out << ',' << buf;
    }
    out << "\n";
  }
}

// Per-stage summary for the final report.
template <typename Real>
nlohmann::ordered_json stage_report(const RunResult<Real>& result) {
  nlohmann::ordered_json stages = nlohmann::ordered_json::array();
  for (const auto& st : result.stages) {
    nlohmann::ordered_json j;
    j["stage"] = st.stage;
    j["enhanced_set_size"] = st.l_s.size();
    j["confident_count"] = st.confident_count;
    j["best_val_metric"] = st.best_val_metric;
    j["test_at_best"] = st.test_at_best;
    j["train_at_best"] = st.train_at_best;
    j["wall_ms"] = st.wall_ms;
    stages.push_back(j);
  }
  return stages;
}

}  // namespace sagn
