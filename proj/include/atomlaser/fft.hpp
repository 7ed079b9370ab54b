#pragma once

#include <complex>
#include <cstddef>
#include <mutex>
#include <stdexcept>

#include <fftw3.h>

namespace atomlaser {

namespace detail {
// FFTW planning is not thread-safe; execution is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

// Aligned complex buffer with in-place forward/backward transforms. The
// backward transform is unnormalized, as in FFTW.
class FftBuffer {
 public:
  explicit FftBuffer(std::size_t n) : n_(n) {
    std::lock_guard lock(detail::fftw_planner_mutex());
    data_ = fftw_alloc_complex(n_);
    if (data_ == nullptr) throw std::bad_alloc();
    const int len = static_cast<int>(n_);
    forward_ = fftw_plan_dft_1d(len, data_, data_, FFTW_FORWARD, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_1d(len, data_, data_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~FftBuffer() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(data_);
  }
  FftBuffer(const FftBuffer&) = delete;
  FftBuffer& operator=(const FftBuffer&) = delete;

  std::size_t size() const { return n_; }
  std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(data_); }
  const std::complex<double>* data() const { return reinterpret_cast<const std::complex<double>*>(data_); }
  std::complex<double>& operator[](std::size_t i) { return data()[i]; }
  const std::complex<double>& operator[](std::size_t i) const { return data()[i]; }

  void forward() { fftw_execute(forward_); }
  void backward() { fftw_execute(backward_); }

 private:
  std::size_t n_;
  fftw_complex* data_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

// Angular wavenumbers in FFT order for n points spaced dx.
inline double fft_wavenumber(std::size_t j, std::size_t n, double dx) {
  const double dk = 2.0 * 3.14159265358979323846 / (static_cast<double>(n) * dx);
  const auto signed_j = j < (n + 1) / 2 ? static_cast<double>(j) : static_cast<double>(j) - static_cast<double>(n);
  return signed_j * dk;
}

}  // namespace atomlaser
