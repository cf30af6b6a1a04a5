#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "polyfs/audio/buffer.hpp"

namespace polyfs {

// Band-limited interpolation with a Kaiser-windowed sinc kernel. The kernel
// is tabulated once and linearly interpolated. Cutoff sits at `rolloff` of
// the lower Nyquist frequency; with these defaults the stopband is below
// -80 dB.
struct ResamplerConfig {
  int zero_crossings = 32;
  double rolloff = 0.94;
  double kaiser_beta = 10.0;
  int table_precision = 512;
};

namespace resample_detail {

inline double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

struct KernelTable {
  std::vector<double> values;
  double step = 0.0;  // table entries per zero crossing

  double at(double x) const {  // x >= 0, in zero-crossing units
    const double pos = x * step;
    const size_t i = static_cast<size_t>(pos);
    if (i + 1 >= values.size()) return 0.0;
    const double frac = pos - static_cast<double>(i);
    return values[i] + frac * (values[i + 1] - values[i]);
  }
};

inline KernelTable make_table(const ResamplerConfig& cfg) {
  KernelTable t;
  t.step = cfg.table_precision;
  const size_t n = static_cast<size_t>(cfg.zero_crossings) * cfg.table_precision + 1;
  t.values.resize(n + 1, 0.0);
  const double norm = bessel_i0(cfg.kaiser_beta);
  for (size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / cfg.table_precision;
    const double r = x / cfg.zero_crossings;
    const double win = bessel_i0(cfg.kaiser_beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / norm;
    const double arg = M_PI * cfg.rolloff * x;
    const double sinc = x == 0.0 ? 1.0 : std::sin(arg) / arg;
    t.values[i] = cfg.rolloff * sinc * win;
  }
  return t;
}

}  // namespace resample_detail

/// Resamples so that output sample n sits at input time n / ratio, where
/// ratio = out_rate / in_rate. Output length is out_len.
inline std::vector<double> resample_samples(std::span<const double> in, double ratio, size_t out_len,
                                            const ResamplerConfig& cfg = {}) {
  require(ratio > 0.0 && std::isfinite(ratio), ErrorKind::kInvalidArgument, "resample ratio must be positive");
  static const resample_detail::KernelTable default_table = resample_detail::make_table(ResamplerConfig{});
  const bool is_default = cfg.zero_crossings == 32 && cfg.rolloff == 0.94 && cfg.kaiser_beta == 10.0 &&
                          cfg.table_precision == 512;
  const resample_detail::KernelTable custom = is_default ? resample_detail::KernelTable{} : resample_detail::make_table(cfg);
  const auto& table = is_default ? default_table : custom;

  const double scale = std::min(1.0, ratio);
  const double reach = cfg.zero_crossings / scale;  // half-width in input samples
  std::vector<double> out(out_len, 0.0);
  const ptrdiff_t n_in = static_cast<ptrdiff_t>(in.size());
  for (size_t n = 0; n < out_len; ++n) {
    const double t = static_cast<double>(n) / ratio;
    const ptrdiff_t lo = std::max<ptrdiff_t>(0, static_cast<ptrdiff_t>(std::ceil(t - reach)));
    const ptrdiff_t hi = std::min<ptrdiff_t>(n_in - 1, static_cast<ptrdiff_t>(std::floor(t + reach)));
    double acc = 0.0;
    for (ptrdiff_t k = lo; k <= hi; ++k) {
      acc += in[k] * table.at(std::abs(t - static_cast<double>(k)) * scale);
    }
    out[n] = acc * scale;
  }
  return out;
}

inline AudioBuffer resample(const AudioBuffer& buf, int target_rate, const ResamplerConfig& cfg = {}) {
  require(target_rate > 0, ErrorKind::kInvalidArgument, "target sample rate must be positive");
  if (buf.sample_rate == target_rate) {
    return buf;
  }
  const double ratio = static_cast<double>(target_rate) / buf.sample_rate;
  const size_t out_len = static_cast<size_t>(std::llround(static_cast<double>(buf.size()) * ratio));
  return {resample_samples(buf.view(), ratio, out_len, cfg), target_rate};
}

/// Stretches or compresses the sample grid to exactly out_len samples at the
/// same nominal rate (used by pitch shifting).
inline std::vector<double> resample_to_length(std::span<const double> in, size_t out_len,
                                              const ResamplerConfig& cfg = {}) {
  if (in.empty() || out_len == 0) {
    return std::vector<double>(out_len, 0.0);
  }
  const double ratio = static_cast<double>(out_len) / static_cast<double>(in.size());
  return resample_samples(in, ratio, out_len, cfg);
}

}  // namespace polyfs
