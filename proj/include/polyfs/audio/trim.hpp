#pragma once

#include <cmath>
#include <span>

#include "polyfs/audio/buffer.hpp"

namespace polyfs {

/// Drops leading and trailing windows of length min_dur_s whose RMS is below
/// threshold_frac of full scale. Windows are aligned to the buffer start and
/// the kept region starts and ends on window boundaries, so trimming twice is
/// the same as trimming once. A buffer with no loud window becomes empty.
inline AudioBuffer trim_silence(const AudioBuffer& buf, double threshold_frac = 0.001,
                                double min_dur_s = 0.01) {
  require(threshold_frac > 0.0 && threshold_frac < 1.0, ErrorKind::kInvalidArgument,
          "threshold_frac must be in (0, 1)");
  require(min_dur_s > 0.0, ErrorKind::kInvalidArgument, "min_dur_s must be positive");
  const size_t win = std::max<size_t>(1, static_cast<size_t>(std::llround(min_dur_s * buf.sample_rate)));
  const size_t n = buf.size();
  const size_t n_windows = (n + win - 1) / win;
  auto loud = [&](size_t w) {
    const size_t lo = w * win;
    const size_t hi = std::min(n, lo + win);
    return rms(std::span<const double>(buf.samples).subspan(lo, hi - lo)) >= threshold_frac;
  };
  size_t first = 0;
  while (first < n_windows && !loud(first)) ++first;
  if (first == n_windows) {
    return {{}, buf.sample_rate};
  }
  size_t last = n_windows - 1;
  while (last > first && !loud(last)) --last;
  const size_t lo = first * win;
  const size_t hi = std::min(n, (last + 1) * win);
  return {std::vector<double>(buf.samples.begin() + static_cast<ptrdiff_t>(lo),
                              buf.samples.begin() + static_cast<ptrdiff_t>(hi)),
          buf.sample_rate};
}

}  // namespace polyfs
