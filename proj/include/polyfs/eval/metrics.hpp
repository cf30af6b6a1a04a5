#pragma once

#include <vector>

#include <Eigen/Dense>

#include "polyfs/util/error.hpp"

namespace polyfs {

struct ClassPRF {
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

inline ClassPRF prf_from_counts(size_t tp, size_t fp, size_t fn) {
  ClassPRF r{tp, fp, fn};
  r.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

/// Per-column precision, recall and F-measure; a score counts as a positive
/// prediction when it exceeds `threshold`. Ratios with a zero denominator are 0.
inline std::vector<ClassPRF> f_measure(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& labels,
                                       double threshold = 0.5) {
  require(scores.rows() == labels.rows() && scores.cols() == labels.cols(), ErrorKind::kInvalidArgument,
          "score and label shapes differ");
  std::vector<ClassPRF> out(static_cast<size_t>(scores.cols()));
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    size_t tp = 0, fp = 0, fn = 0;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      const bool pred = scores(r, c) > threshold;
      const bool truth = labels(r, c) > 0.5;
      tp += pred && truth;
      fp += pred && !truth;
      fn += !pred && truth;
    }
    out[static_cast<size_t>(c)] = prf_from_counts(tp, fp, fn);
  }
  return out;
}

}  // namespace polyfs
