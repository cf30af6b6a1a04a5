#pragma once

#include <Eigen/Dense>

#include "polyfs/audio/mel.hpp"
#include "polyfs/audio/resample.hpp"

namespace polyfs {

/// Per-band mean and standard deviation of the log-mel matrix, concatenated
/// (2 * n_mels values) and L2-normalized. Audio at another rate is resampled
/// first.
inline Eigen::VectorXd pool_embed(const AudioBuffer& clip, const MelConfig& cfg = {}) {
  const AudioBuffer audio = clip.sample_rate == cfg.sample_rate ? clip : resample(clip, cfg.sample_rate);
  const Eigen::MatrixXd mel = log_mel(audio, cfg);
  const Eigen::RowVectorXd mean = mel.colwise().mean();
  const Eigen::RowVectorXd sd = ((mel.rowwise() - mean).array().square().colwise().mean()).sqrt();
  Eigen::VectorXd v(2 * mel.cols());
  v << mean.transpose(), sd.transpose();
  const double norm = v.norm();
  require(norm > 0.0 && std::isfinite(norm), ErrorKind::kValidation, "zero embedding");
  return v / norm;
}

}  // namespace polyfs
