#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "sagn/graph_io.hpp"
#include "sagn/nn.hpp"

namespace sagn {

// Named-tensor archive, magic "SGNP". Entry kind 0 = parameter, 1 = buffer
// (running statistics); only kind-0 entries count toward parameter totals.

template <typename Real>
void save_checkpoint(const std::vector<TensorRef<Real>>& refs,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  check_data(out.good(), "cannot write checkpoint: " + path);
  using namespace io_detail;
  write_bytes(out, "SGNP", 4);
  write_pod<std::uint32_t>(out, 1);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(refs.size()));
  for (const auto& r : refs) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
    write_bytes(out, r.name.data(), r.name.size());
    write_pod<std::uint64_t>(out, r.tensor->rows);
    write_pod<std::uint64_t>(out, r.tensor->cols);
    write_pod<std::uint32_t>(out, dtype_code<Real>());
    write_pod<std::uint8_t>(out, r.buffer ? 1 : 0);
    write_vec(out, r.tensor->data);
  }
  check_data(out.good(), "write failed: " + path);
}

struct CheckpointEntry {
  std::string name;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::uint32_t dtype = 0;
  bool buffer = false;
  std::vector<double> data;  // widest type; cast on apply
};

inline std::vector<CheckpointEntry> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check_data(in.good(), "cannot open checkpoint: " + path);
  using namespace io_detail;
  char magic[4];
  read_bytes(in, magic, 4, "magic");
  check_data(std::memcmp(magic, "SGNP", 4) == 0,
             "not a checkpoint (bad magic): " + path);
  const auto version = read_pod<std::uint32_t>(in, "version");
  check_data(version == 1, "unsupported checkpoint version");
  const auto count = read_pod<std::uint32_t>(in, "entry count");
  std::vector<CheckpointEntry> entries(count);
  for (auto& e : entries) {
    const auto name_len = read_pod<std::uint32_t>(in, "name length");
    e.name.resize(name_len);
    read_bytes(in, e.name.data(), name_len, "name");
    e.rows = read_pod<std::uint64_t>(in, "rows");
    e.cols = read_pod<std::uint64_t>(in, "cols");
    e.dtype = read_pod<std::uint32_t>(in, "dtype");
    e.buffer = read_pod<std::uint8_t>(in, "kind") != 0;
    const std::size_t n = e.rows * e.cols;
    e.data.resize(n);
    if (e.dtype == 0) {
      std::vector<float> tmp;
      read_vec(in, tmp, n, "tensor data");
      for (std::size_t i = 0; i < n; ++i) e.data[i] = tmp[i];
    } else {
      read_vec(in, e.data, n, "tensor data");
    }
  }
  return entries;
}

// Restores every ref from the archive; missing or shape-mismatched entries
// are data errors (exact round-trip contract).
template <typename Real>
void load_checkpoint(const std::vector<TensorRef<Real>>& refs,
                     const std::string& path) {
  const auto entries = read_checkpoint(path);
  for (const auto& r : refs) {
    const CheckpointEntry* found = nullptr;
    for (const auto& e : entries) {
      if (e.name == r.name) {
        found = &e;
        break;
      }
    }
    check_data(found != nullptr, "checkpoint missing tensor: " + r.name);
    check_data(found->rows == r.tensor->rows && found->cols == r.tensor->cols,
               "checkpoint shape mismatch for " + r.name);
    check_data(found->dtype == dtype_code<Real>(),
               "checkpoint dtype mismatch for " + r.name);
    for (std::size_t i = 0; i < found->data.size(); ++i) {
      r.tensor->data[i] = static_cast<Real>(found->data[i]);
    }
  }
}

// Scalar count of parameter entries in an archive.
inline std::size_t checkpoint_param_count(const std::string& path) {
  std::size_t total = 0;
  for (const auto& e : read_checkpoint(path)) {
    if (!e.buffer) total += static_cast<std::size_t>(e.rows * e.cols);
  }
  return total;
}

}  // namespace sagn
