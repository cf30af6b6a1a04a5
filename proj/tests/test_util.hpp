#pragma once

// Independent measurement helpers shared by the unit and acceptance suites.
// Nothing here calls into the library's DSP code.

#include <cmath>
#include <complex>
#include <vector>

#include "polyfs/audio/buffer.hpp"
#include "polyfs/util/rng.hpp"

namespace polyfs::testing {

inline AudioBuffer sine(double freq, double seconds, int sr, double amp = 0.5) {
  std::vector<double> x(static_cast<size_t>(std::llround(seconds * sr)));
  for (size_t i = 0; i < x.size(); ++i) {
    x[i] = amp * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / sr);
  }
  return {std::move(x), sr};
}

inline AudioBuffer white(double seconds, int sr, double sigma, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(static_cast<size_t>(std::llround(seconds * sr)));
  for (double& v : x) v = sigma * rng.normal();
  return {std::move(x), sr};
}

/// |DFT|^2 of a Hann-windowed slice evaluated directly at `freq`.
inline double dft_power(const std::vector<double>& x, size_t begin, size_t len, double freq, int sr) {
  std::complex<double> acc = 0.0;
  for (size_t i = 0; i < len; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(len));
    const double ph = -2.0 * M_PI * freq * static_cast<double>(i) / sr;
    acc += w * x[begin + i] * std::complex<double>(std::cos(ph), std::sin(ph));
  }
  return std::norm(acc);
}

/// Dominant frequency of the middle `seconds` of a buffer, found by scanning a
/// direct DFT on a 1 Hz grid over [lo, hi].
inline double peak_frequency(const AudioBuffer& buf, double lo = 50.0, double hi = 2000.0,
                             double seconds = 0.2) {
  const size_t len = std::min(buf.size(), static_cast<size_t>(seconds * buf.sample_rate));
  const size_t begin = (buf.size() - len) / 2;
  double best_f = lo, best_p = -1.0;
  for (double f = lo; f <= hi; f += 1.0) {
    const double p = dft_power(buf.samples, begin, len, f, buf.sample_rate);
    if (p > best_p) {
      best_p = p;
      best_f = f;
    }
  }
  return best_f;
}

/// Welch-style PSD slope in dB/decade: Hann-windowed segments, power averaged
/// per frequency, evaluated on a log-spaced grid by direct DFT, then a
/// least-squares line through (log10 f, 10 log10 P).
inline double psd_slope_db_per_decade(const AudioBuffer& buf, double f_lo, double f_hi, size_t seg = 8192,
                                      int n_freqs = 24) {
  std::vector<double> lx, ly;
  for (int j = 0; j < n_freqs; ++j) {
    const double f = f_lo * std::pow(f_hi / f_lo, static_cast<double>(j) / (n_freqs - 1));
    double p = 0.0;
    size_t count = 0;
    for (size_t start = 0; start + seg <= buf.size(); start += seg / 2) {
      p += dft_power(buf.samples, start, seg, f, buf.sample_rate);
      ++count;
    }
    lx.push_back(std::log10(f));
    ly.push_back(10.0 * std::log10(p / static_cast<double>(count)));
  }
  double mx = 0, my = 0;
  for (size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= lx.size();
  my /= ly.size();
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

/// First and last sample index whose magnitude exceeds `thresh`.
inline std::pair<size_t, size_t> active_span(const std::vector<double>& x, double thresh) {
  size_t a = x.size(), b = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) > thresh) {
      a = std::min(a, i);
      b = i;
    }
  }
  return {a, b};
}

}  // namespace polyfs::testing
