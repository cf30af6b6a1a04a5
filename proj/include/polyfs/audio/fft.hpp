#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

#include "polyfs/util/error.hpp"

namespace polyfs {

namespace fft_detail {

// FFTW planning is not thread-safe; execution on distinct plans is.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

}  // namespace fft_detail

/// Real-input FFT of fixed size n with its own buffers; one instance per thread.
class RealFft {
 public:
  explicit RealFft(size_t n) : n_(n) {
    require(n > 0, ErrorKind::kInvalidArgument, "fft size must be positive");
    real_.reset(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
    spec_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins())));
    std::lock_guard<std::mutex> lock(fft_detail::planner_mutex());
    forward_.reset(fftw_plan_dft_r2c_1d(static_cast<int>(n), real_.get(), spec_.get(), FFTW_ESTIMATE));
    inverse_.reset(fftw_plan_dft_c2r_1d(static_cast<int>(n), spec_.get(), real_.get(), FFTW_ESTIMATE));
  }

  size_t size() const { return n_; }
  size_t bins() const { return n_ / 2 + 1; }

  /// out has bins() entries; unnormalized.
  void forward(std::span<const double> in, std::span<std::complex<double>> out) {
    std::copy(in.begin(), in.end(), real_.get());
    fftw_execute(forward_.get());
    for (size_t k = 0; k < bins(); ++k) {
      out[k] = {spec_.get()[k][0], spec_.get()[k][1]};
    }
  }

  /// Inverse transform scaled by 1/n so that inverse(forward(x)) == x.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out) {
    for (size_t k = 0; k < bins(); ++k) {
      spec_.get()[k][0] = in[k].real();
      spec_.get()[k][1] = in[k].imag();
    }
    fftw_execute(inverse_.get());
    const double scale = 1.0 / static_cast<double>(n_);
    for (size_t i = 0; i < n_; ++i) {
      out[i] = real_.get()[i] * scale;
    }
  }

 private:
  size_t n_;
  std::unique_ptr<double, fft_detail::FftwFree> real_;
  std::unique_ptr<fftw_complex, fft_detail::FftwFree> spec_;
  std::unique_ptr<fftw_plan_s, fft_detail::PlanDeleter> forward_;
  std::unique_ptr<fftw_plan_s, fft_detail::PlanDeleter> inverse_;
};

/// Periodic Hann window (the DFT-even form used for spectral analysis).
inline std::vector<double> hann_window(size_t n) {
  std::vector<double> w(n);
  for (size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

}  // namespace polyfs
