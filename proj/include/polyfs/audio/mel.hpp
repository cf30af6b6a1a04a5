#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "polyfs/audio/buffer.hpp"
#include "polyfs/audio/stft.hpp"

namespace polyfs {

struct MelConfig {
  int sample_rate = 16000;
  int n_mels = 64;
  double win_ms = 25.0;
  double hop_ms = 10.0;
  double fft_ms = 64.0;
  double log_floor = 1e-10;

  size_t win_length() const { return static_cast<size_t>(std::llround(win_ms * sample_rate / 1000.0)); }
  size_t hop_length() const { return static_cast<size_t>(std::llround(hop_ms * sample_rate / 1000.0)); }
  size_t n_fft() const { return static_cast<size_t>(std::llround(fft_ms * sample_rate / 1000.0)); }

  void validate() const {
    require(sample_rate > 0 && n_mels > 0 && win_ms > 0 && hop_ms > 0 && fft_ms > 0 && log_floor > 0,
            ErrorKind::kInvalidArgument, "mel config values must be positive");
    require(fft_ms >= win_ms, ErrorKind::kInvalidArgument, "fft_ms must be >= win_ms");
  }
};

// Slaney mel scale: linear below 1 kHz, logarithmic above.
inline double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return hz >= min_log_hz ? min_log_mel + std::log(hz / min_log_hz) / logstep : hz / f_sp;
}

inline double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return mel >= min_log_mel ? min_log_hz * std::exp(logstep * (mel - min_log_mel)) : f_sp * mel;
}

/// Triangular filters between 0 Hz and Nyquist, area-normalized
/// (n_mels x (n_fft/2 + 1)).
inline Eigen::MatrixXd mel_filterbank(int sample_rate, size_t n_fft, int n_mels) {
  const size_t bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
  }
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(n_mels, static_cast<Eigen::Index>(bins));
  for (int m = 0; m < n_mels; ++m) {
    const double lower_w = edges[m + 1] - edges[m];
    const double upper_w = edges[m + 2] - edges[m + 1];
    const double enorm = 2.0 / (edges[m + 2] - edges[m]);
    for (size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
      const double lower = (f - edges[m]) / lower_w;
      const double upper = (edges[m + 2] - f) / upper_w;
      fb(m, static_cast<Eigen::Index>(k)) = std::max(0.0, std::min(lower, upper)) * enorm;
    }
  }
  return fb;
}

/// Log mel power spectrogram, frames x n_mels, with
/// n_frames = 1 + floor(len / hop).
inline Eigen::MatrixXd log_mel(const AudioBuffer& buf, const MelConfig& cfg = {}) {
  cfg.validate();
  require(buf.sample_rate == cfg.sample_rate, ErrorKind::kInvalidArgument,
          "log_mel expects " + std::to_string(cfg.sample_rate) + " Hz input, got " +
              std::to_string(buf.sample_rate));
  const size_t win = cfg.win_length();
  require(buf.size() >= win, ErrorKind::kInvalidArgument, "buffer shorter than one analysis window");
  const size_t n_fft = cfg.n_fft();
  const std::vector<Spectrum> frames = stft(buf.view(), n_fft, cfg.hop_length(), hann_window(win));
  const Eigen::MatrixXd fb = mel_filterbank(cfg.sample_rate, n_fft, cfg.n_mels);
  const Eigen::Index bins = fb.cols();
  Eigen::MatrixXd power(bins, static_cast<Eigen::Index>(frames.size()));
  for (size_t t = 0; t < frames.size(); ++t) {
    for (Eigen::Index k = 0; k < bins; ++k) {
      power(k, static_cast<Eigen::Index>(t)) = std::norm(frames[t][static_cast<size_t>(k)]);
    }
  }
  Eigen::MatrixXd mel = (fb * power).transpose();
  return (mel.array() + cfg.log_floor).log().matrix();
}

}  // namespace polyfs
