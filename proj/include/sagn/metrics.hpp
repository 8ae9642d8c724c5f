#pragma once

#include <string>
#include <vector>

#include "sagn/matrix.hpp"

namespace sagn {

enum class MetricKind { Accuracy, MicroF1 };

inline const char* to_string(MetricKind k) {
  return k == MetricKind::Accuracy ? "accuracy" : "micro_f1";
}

// Row argmax with ties broken to the lowest class index.
template <typename Real>
std::vector<int> argmax_rows(const Matrix<Real>& m) {
  std::vector<int> out(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const Real* r = m.row(i);
    int best = 0;
    for (std::size_t c = 1; c < m.cols; ++c) {
      if (r[c] > r[best]) best = static_cast<int>(c);
    }
    out[i] = best;
  }
  return out;
}

template <typename Real>
Matrix<Real> one_hot(const std::vector<int>& ids, std::size_t num_classes) {
  Matrix<Real> out(ids.size(), num_classes);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    check(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < num_classes,
          "one_hot: class id out of range");
    out(i, ids[i]) = Real(1);
  }
  return out;
}

inline double accuracy(const std::vector<int>& y_true,
                       const std::vector<int>& y_pred) {
  check(!y_true.empty(), "accuracy: empty input");
  check(y_true.size() == y_pred.size(), "accuracy: length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] == y_pred[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(y_true.size());
}

// Micro-F1 pooled over every (node, label) binary decision. For single-label
// predictions expressed as one-hot rows this equals accuracy.
template <typename Real>
double micro_f1(const Matrix<Real>& y_true01, const Matrix<Real>& y_pred01) {
  check(y_true01.rows > 0, "micro_f1: empty input");
  check(y_true01.same_shape(y_pred01), "micro_f1: shape mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < y_true01.data.size(); ++i) {
    const bool t = y_true01.data[i] > Real(0.5);
    const bool p = y_pred01.data[i] > Real(0.5);
    if (t && p) ++tp;
    if (!t && p) ++fp;
    if (t && !p) ++fn;
  }
  const double denom = static_cast<double>(2 * tp + fp + fn);
  if (denom == 0.0) return 1.0;  // no positives anywhere, nothing wrong
  return 2.0 * static_cast<double>(tp) / denom;
}

// Thresholds probabilities at 0.5 into binary decisions.
template <typename Real>
Matrix<Real> threshold_probs(const Matrix<Real>& probs, double thresh = 0.5) {
  Matrix<Real> out(probs.rows, probs.cols);
  for (std::size_t i = 0; i < probs.data.size(); ++i) {
    out.data[i] = probs.data[i] >= static_cast<Real>(thresh) ? Real(1)
                                                             : Real(0);
  }
  return out;
}

}  // namespace sagn
