#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace polyfs {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive-moment state for one parameter block.
class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index rows, Eigen::Index cols, AdamConfig cfg)
      : cfg_(cfg), m_(Eigen::ArrayXXd::Zero(rows, cols)), v_(Eigen::ArrayXXd::Zero(rows, cols)) {}

  template <typename Param, typename Grad>
  void step(Param& param, const Grad& grad) {
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad.array();
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.array().square();
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    param.array() -= cfg_.lr * (m_ / c1) / ((v_ / c2).sqrt() + cfg_.eps);
  }

 private:
  AdamConfig cfg_;
  Eigen::ArrayXXd m_;
  Eigen::ArrayXXd v_;
  long t_ = 0;
};

}  // namespace polyfs
