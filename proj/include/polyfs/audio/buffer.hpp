#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "polyfs/util/error.hpp"

namespace polyfs {

/// Mono audio. Samples are nominally in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 44100;

  AudioBuffer() = default;
  AudioBuffer(std::vector<double> s, int sr) : samples(std::move(s)), sample_rate(sr) {}

  static AudioBuffer silence(size_t n, int sr) { return {std::vector<double>(n, 0.0), sr}; }

  size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }

  std::span<const double> view() const { return samples; }

  friend bool operator==(const AudioBuffer&, const AudioBuffer&) = default;
};

inline double rms(std::span<const double> x) {
  if (x.empty()) {
    return 0.0;
  }
  double acc = 0.0;
  for (double v : x) {
    acc += v * v;
  }
  return std::sqrt(acc / static_cast<double>(x.size()));
}

inline double rms(const AudioBuffer& buf) { return rms(buf.view()); }

inline double peak(std::span<const double> x) {
  double p = 0.0;
  for (double v : x) {
    p = std::max(p, std::abs(v));
  }
  return p;
}

inline double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }
inline double amplitude_to_db(double a) { return 20.0 * std::log10(a); }

/// Gain g such that rms(g * fg) / bg_rms == 10^(snr_db / 20).
inline double gain_for_snr(double fg_rms, double bg_rms, double snr_db) {
  require(fg_rms > 0.0 && bg_rms > 0.0 && std::isfinite(fg_rms) && std::isfinite(bg_rms),
          ErrorKind::kInvalidArgument, "degenerate signal");
  return (bg_rms / fg_rms) * db_to_amplitude(snr_db);
}

inline size_t onset_to_sample(double onset_s, int sample_rate) {
  return static_cast<size_t>(std::llround(onset_s * sample_rate));
}

/// Adds gain * event into base starting at round(onset_s * sr).
inline void mix_into(AudioBuffer& base, const AudioBuffer& event, double onset_s, double gain) {
  require(base.sample_rate == event.sample_rate, ErrorKind::kInvalidArgument,
          "sample rate mismatch: " + std::to_string(base.sample_rate) + " vs " +
              std::to_string(event.sample_rate));
  require(onset_s >= 0.0, ErrorKind::kInvalidArgument, "negative onset");
  const size_t start = onset_to_sample(onset_s, base.sample_rate);
  require(start + event.size() <= base.size(), ErrorKind::kInvalidArgument, "placement overflow");
  for (size_t i = 0; i < event.size(); ++i) {
    base.samples[start + i] += gain * event.samples[i];
  }
}

inline AudioBuffer mix(const AudioBuffer& base, const AudioBuffer& event, double onset_s,
                       double gain) {
  AudioBuffer out = base;
  mix_into(out, event, onset_s, gain);
  return out;
}

inline void scale_in_place(AudioBuffer& buf, double gain) {
  for (double& v : buf.samples) {
    v *= gain;
  }
}

inline void validate(const AudioBuffer& buf) {
  require(buf.sample_rate > 0, ErrorKind::kValidation, "sample rate must be positive");
  for (double v : buf.samples) {
    require(std::isfinite(v), ErrorKind::kValidation, "non-finite sample");
  }
}

}  // namespace polyfs
