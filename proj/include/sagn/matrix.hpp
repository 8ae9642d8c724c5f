#pragma once

#include <cstring>
#include <vector>

#include "sagn/common.hpp"

namespace sagn {

// dtype tag used by the binary formats: 0 = f32, 1 = f64.
template <typename Real>
constexpr std::uint32_t dtype_code() {
  return std::is_same_v<Real, float> ? 0u : 1u;
}

// Dense row-major matrix. Real is float for experiment builds and double for
// gradient-check builds.
template <typename Real>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Real> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, Real fill = Real(0))
      : rows(r), cols(c), data(r * c, fill) {}

  Real* row(std::size_t i) { return data.data() + i * cols; }
  const Real* row(std::size_t i) const { return data.data() + i * cols; }

  Real& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  Real operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }

  bool same_shape(const Matrix& o) const {
    return rows == o.rows && cols == o.cols;
  }

  void fill(Real v) { std::fill(data.begin(), data.end(), v); }

  void resize(std::size_t r, std::size_t c) {
    rows = r;
    cols = c;
    data.assign(r * c, Real(0));
  }

  bool all_finite() const {
    for (Real v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  std::uint64_t content_hash() const {
    Fnv1a h;
    h.update_pod(static_cast<std::uint64_t>(rows));
    h.update_pod(static_cast<std::uint64_t>(cols));
    h.update_vec(data);
    return h.digest();
  }

  // Gathers the given rows into a fresh B x cols matrix.
  template <typename Index>
  Matrix take_rows(const std::vector<Index>& ids) const {
    Matrix out(ids.size(), cols);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      std::memcpy(out.row(i), row(static_cast<std::size_t>(ids[i])),
                  cols * sizeof(Real));
    }
    return out;
  }
};

template <typename Real>
bool operator==(const Matrix<Real>& a, const Matrix<Real>& b) {
  return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

template <typename Real>
Real max_abs_diff(const Matrix<Real>& a, const Matrix<Real>& b) {
  check(a.same_shape(b), "max_abs_diff: shape mismatch");
  Real m = Real(0);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  }
  return m;
}

// out = a * b. ikj loop order: streams rows of b and out.
template <typename Real>
void gemm(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& out,
          int threads = 1) {
  check(a.cols == b.rows, "gemm: inner dimensions differ");
  out.resize(a.rows, b.cols);
  parallel_for(a.rows, threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      Real* o = out.row(i);
      const Real* ar = a.row(i);
      for (std::size_t k = 0; k < a.cols; ++k) {
        const Real av = ar[k];
        if (av == Real(0)) continue;
        const Real* br = b.row(k);
        for (std::size_t j = 0; j < b.cols; ++j) o[j] += av * br[j];
      }
    }
  });
}

// out = a^T * b, with a of shape (n x r) and b of shape (n x c).
template <typename Real>
void gemm_tn(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& out,
             int threads = 1) {
  check(a.rows == b.rows, "gemm_tn: row counts differ");
  out.resize(a.cols, b.cols);
  // Partition output rows (= columns of a) to keep writes disjoint.
  parallel_for(a.cols, threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t n = 0; n < a.rows; ++n) {
      const Real* ar = a.row(n);
      const Real* br = b.row(n);
      for (std::size_t i = lo; i < hi; ++i) {
        const Real av = ar[i];
        if (av == Real(0)) continue;
        Real* o = out.row(i);
        for (std::size_t j = 0; j < b.cols; ++j) o[j] += av * br[j];
      }
    }
  });
}

// out = a * b^T, with a of shape (n x k) and b of shape (m x k).
template <typename Real>
void gemm_nt(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& out,
             int threads = 1) {
  check(a.cols == b.cols, "gemm_nt: inner dimensions differ");
  out.resize(a.rows, b.rows);
  parallel_for(a.rows, threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const Real* ar = a.row(i);
      Real* o = out.row(i);
      for (std::size_t j = 0; j < b.rows; ++j) {
        const Real* br = b.row(j);
        Real acc = Real(0);
        for (std::size_t k = 0; k < a.cols; ++k) acc += ar[k] * br[k];
        o[j] = acc;
      }
    }
  });
}

template <typename Real>
void add_inplace(Matrix<Real>& a, const Matrix<Real>& b) {
  check(a.same_shape(b), "add_inplace: shape mismatch");
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

template <typename Real>
void scale_inplace(Matrix<Real>& a, Real s) {
  for (auto& v : a.data) v *= s;
}

template <typename Real, typename RealOut>
Matrix<RealOut> cast_matrix(const Matrix<Real>& a) {
  Matrix<RealOut> out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    out.data[i] = static_cast<RealOut>(a.data[i]);
  }
  return out;
}

}  // namespace sagn
