#pragma once

#include <complex>
#include <span>
#include <vector>

#include "polyfs/audio/fft.hpp"

namespace polyfs {

using Spectrum = std::vector<std::complex<double>>;

/// Mirror-pads both ends without repeating the edge sample (numpy "reflect").
/// Pads longer than the signal fold back repeatedly. Signals shorter than two
/// samples are zero-padded.
inline std::vector<double> reflect_pad(std::span<const double> x, size_t pad) {
  const ptrdiff_t n = static_cast<ptrdiff_t>(x.size());
  std::vector<double> out(x.size() + 2 * pad, 0.0);
  if (n < 2) {
    std::copy(x.begin(), x.end(), out.begin() + static_cast<ptrdiff_t>(pad));
    return out;
  }
  const ptrdiff_t period = 2 * (n - 1);
  for (size_t i = 0; i < out.size(); ++i) {
    ptrdiff_t j = static_cast<ptrdiff_t>(i) - static_cast<ptrdiff_t>(pad);
    j %= period;
    if (j < 0) j += period;
    if (j >= n) j = period - j;
    out[i] = x[j];
  }
  return out;
}

/// Centered short-time Fourier transform. `window` has length <= n_fft and is
/// zero-padded symmetrically to n_fft. Frame t covers padded samples
/// [t*hop, t*hop + n_fft).
inline std::vector<Spectrum> stft(std::span<const double> x, size_t n_fft, size_t hop,
                                  std::span<const double> window) {
  require(window.size() <= n_fft && hop > 0, ErrorKind::kInvalidArgument, "bad STFT geometry");
  std::vector<double> full_window(n_fft, 0.0);
  const size_t offset = (n_fft - window.size()) / 2;
  std::copy(window.begin(), window.end(), full_window.begin() + static_cast<ptrdiff_t>(offset));

  const std::vector<double> padded = reflect_pad(x, n_fft / 2);
  const size_t n_frames = padded.size() < n_fft ? 0 : 1 + (padded.size() - n_fft) / hop;
  RealFft fft(n_fft);
  std::vector<double> frame(n_fft);
  std::vector<Spectrum> frames(n_frames, Spectrum(fft.bins()));
  for (size_t t = 0; t < n_frames; ++t) {
    for (size_t i = 0; i < n_fft; ++i) {
      frame[i] = padded[t * hop + i] * full_window[i];
    }
    fft.forward(frame, frames[t]);
  }
  return frames;
}

/// Inverse of stft() by windowed overlap-add, normalized by the summed squared
/// window, trimmed of the centering pad and cut/zero-filled to `length`.
inline std::vector<double> istft(const std::vector<Spectrum>& frames, size_t n_fft, size_t hop,
                                 std::span<const double> window, size_t length) {
  std::vector<double> full_window(n_fft, 0.0);
  const size_t offset = (n_fft - window.size()) / 2;
  std::copy(window.begin(), window.end(), full_window.begin() + static_cast<ptrdiff_t>(offset));

  const size_t total = n_fft + hop * (frames.empty() ? 0 : frames.size() - 1);
  std::vector<double> acc(total, 0.0), norm(total, 0.0), frame(n_fft);
  RealFft fft(n_fft);
  for (size_t t = 0; t < frames.size(); ++t) {
    fft.inverse(frames[t], frame);
    for (size_t i = 0; i < n_fft; ++i) {
      acc[t * hop + i] += frame[i] * full_window[i];
      norm[t * hop + i] += full_window[i] * full_window[i];
    }
  }
  std::vector<double> out(length, 0.0);
  const size_t start = n_fft / 2;
  for (size_t i = 0; i < length && start + i < total; ++i) {
    const double w = norm[start + i];
    out[i] = w > 1e-10 ? acc[start + i] / w : acc[start + i];
  }
  return out;
}

}  // namespace polyfs
