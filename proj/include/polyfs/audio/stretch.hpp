#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "polyfs/audio/buffer.hpp"
#include "polyfs/audio/resample.hpp"
#include "polyfs/audio/stft.hpp"

namespace polyfs {

struct VocoderConfig {
  size_t n_fft = 2048;
  size_t hop = 512;
};

/// Phase-vocoder time stretch. Output duration is ratio * input duration
/// (ratio > 1 is slower/longer); pitch is preserved.
inline AudioBuffer time_stretch(const AudioBuffer& buf, double ratio, const VocoderConfig& cfg = {}) {
  require(ratio > 0.0 && std::isfinite(ratio), ErrorKind::kInvalidArgument, "stretch ratio must be positive");
  if (ratio == 1.0 || buf.empty()) {
    return buf;
  }
  const size_t out_len = static_cast<size_t>(std::llround(static_cast<double>(buf.size()) * ratio));
  const std::vector<double> window = hann_window(cfg.n_fft);
  std::vector<Spectrum> frames = stft(buf.view(), cfg.n_fft, cfg.hop, window);
  const size_t bins = cfg.n_fft / 2 + 1;
  // Two zero frames at the end so interpolation can always look one ahead.
  frames.emplace_back(bins);
  frames.emplace_back(bins);
  const size_t n_in = frames.size() - 2;

  const double rate = 1.0 / ratio;  // analysis frames consumed per output frame
  std::vector<double> expected(bins);
  for (size_t k = 0; k < bins; ++k) {
    expected[k] = M_PI * static_cast<double>(cfg.hop) * static_cast<double>(k) / static_cast<double>(bins - 1);
  }
  std::vector<double> phase(bins);
  for (size_t k = 0; k < bins; ++k) {
    phase[k] = std::arg(frames[0][k]);
  }

  std::vector<Spectrum> out_frames;
  for (size_t t = 0;; ++t) {
    const double step = static_cast<double>(t) * rate;
    if (step >= static_cast<double>(n_in)) break;
    const size_t idx = static_cast<size_t>(step);
    const double alpha = step - static_cast<double>(idx);
    const Spectrum& a = frames[idx];
    const Spectrum& b = frames[idx + 1];
    Spectrum col(bins);
    for (size_t k = 0; k < bins; ++k) {
      const double mag = (1.0 - alpha) * std::abs(a[k]) + alpha * std::abs(b[k]);
      col[k] = std::polar(mag, phase[k]);
      double dphi = std::arg(b[k]) - std::arg(a[k]) - expected[k];
      dphi -= 2.0 * M_PI * std::round(dphi / (2.0 * M_PI));
      phase[k] += expected[k] + dphi;
    }
    out_frames.push_back(std::move(col));
  }
  return {istft(out_frames, cfg.n_fft, cfg.hop, window, out_len), buf.sample_rate};
}

/// Shifts pitch by `semitones` while keeping the duration: stretch by the
/// frequency factor, then resample back onto the original length.
inline AudioBuffer pitch_shift(const AudioBuffer& buf, double semitones, const VocoderConfig& cfg = {}) {
  require(std::isfinite(semitones), ErrorKind::kInvalidArgument, "semitones must be finite");
  if (semitones == 0.0 || buf.empty()) {
    return buf;
  }
  const double factor = std::pow(2.0, semitones / 12.0);
  const AudioBuffer stretched = time_stretch(buf, factor, cfg);
  return {resample_to_length(stretched.view(), buf.size()), buf.sample_rate};
}

}  // namespace polyfs
