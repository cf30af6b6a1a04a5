#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "polyfs/util/error.hpp"

namespace polyfs {

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

/// Binary cross-entropy of sigmoid(logit) against y in {0, 1}.
inline double bce_with_logit(double logit, double y) { return softplus(logit) - y * logit; }

inline Eigen::VectorXd unit(const Eigen::VectorXd& v, const char* what = "zero-norm vector") {
  const double n = v.norm();
  require(n > 0.0 && std::isfinite(n), ErrorKind::kValidation, what);
  return v / n;
}

inline Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& m, const char* what = "zero-norm row") {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out.row(r) = unit(m.row(r).transpose(), what).transpose();
  }
  return out;
}

/// sigmoid(scale * cos(w_k, z_q)) for every query row q and weight row k.
inline Eigen::MatrixXd cosine_scores(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& queries, double scale) {
  const Eigen::MatrixXd cos = normalize_rows(queries, "zero-norm embedding") *
                              normalize_rows(weights, "zero-norm weight row").transpose();
  return cos.unaryExpr([scale](double c) { return sigmoid(scale * c); });
}

}  // namespace polyfs
