#include "fft.hpp"

#include <mutex>

namespace iwave::detail {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

Fft2::Fft2(int L) : L_(L) {
  std::vector<std::complex<double>> scratch(static_cast<std::size_t>(L) * L);
  auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
  std::lock_guard<std::mutex> lock(planner_mutex());
  fwd_ = fftw_plan_dft_2d(L, L, p, p, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  bwd_ = fftw_plan_dft_2d(L, L, p, p, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
}

Fft2::~Fft2() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(fwd_);
  fftw_destroy_plan(bwd_);
}

void Fft2::forward(std::vector<std::complex<double>>& data) const {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(fwd_, p, p);
  const double scale = 1.0 / (static_cast<double>(L_) * L_);
  for (auto& c : data) c *= scale;
}

void Fft2::backward(std::vector<std::complex<double>>& data) const {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(bwd_, p, p);
}

}  // namespace iwave::detail
