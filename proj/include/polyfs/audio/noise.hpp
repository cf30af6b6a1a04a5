#pragma once

#include <cmath>

#include "polyfs/audio/buffer.hpp"
#include "polyfs/util/rng.hpp"

namespace polyfs {

/// Brownian (red) noise: running sum of white Gaussian noise with the mean
/// removed, scaled to exactly target_rms. Spectrum falls at 20 dB/decade.
inline AudioBuffer brownian_noise(double duration_s, int sample_rate, double target_rms, Rng& rng) {
  require(duration_s > 0.0 && sample_rate > 0 && target_rms > 0.0, ErrorKind::kInvalidArgument,
          "brownian noise needs positive duration, rate and level");
  const size_t n = static_cast<size_t>(std::llround(duration_s * sample_rate));
  std::vector<double> x(n);
  double walk = 0.0, sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    walk += rng.normal();
    x[i] = walk;
    sum += walk;
  }
  const double mean = sum / static_cast<double>(n);
  for (double& v : x) v -= mean;
  const double level = rms(x);
  require(level > 0.0, ErrorKind::kValidation, "degenerate signal");
  const double g = target_rms / level;
  for (double& v : x) v *= g;
  return {std::move(x), sample_rate};
}

}  // namespace polyfs
