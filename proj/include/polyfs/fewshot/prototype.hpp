#pragma once

#include <Eigen/Dense>

#include "polyfs/fewshot/cosine.hpp"

namespace polyfs {

/// Mean of the L2-normalized support rows.
inline Eigen::VectorXd prototype_weight(const Eigen::MatrixXd& support) {
  require(support.rows() >= 1, ErrorKind::kInvalidArgument, "empty support set");
  return normalize_rows(support, "zero-norm embedding").colwise().mean().transpose();
}

}  // namespace polyfs
