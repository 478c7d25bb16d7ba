#pragma once

#include <fftw3.h>

#include <complex>
#include <vector>

namespace iwave::detail {

/// Square 2-D complex DFT of side L. Planning is serialized; execution is
/// reentrant on caller-owned buffers.
class Fft2 {
 public:
  explicit Fft2(int L);
  ~Fft2();
  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;

  int side() const { return L_; }
  /// c(m) = L^{-2} sum_x a(x) e^{-i m.x}, in place.
  void forward(std::vector<std::complex<double>>& data) const;
  /// a(x) = sum_m c(m) e^{i m.x}, in place.
  void backward(std::vector<std::complex<double>>& data) const;

  /// Storage slot of frequency or grid index i (any integer).
  int wrap(int i) const { return ((i % L_) + L_) % L_; }
  int slot(int i1, int i2) const { return wrap(i1) * L_ + wrap(i2); }

 private:
  int L_;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

}  // namespace iwave::detail
