#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstddef>

namespace iwave {

using cplx = std::complex<double>;

/// Fourier modes k = (k1, k2) with |k1|, |k2| <= N, ordered k1-major.
class ModeSet {
 public:
  explicit ModeSet(int N);

  int N() const { return N_; }
  int side() const { return 2 * N_ + 1; }
  std::size_t size() const { return static_cast<std::size_t>(side()) * side(); }

  bool contains(int k1, int k2) const { return std::abs(k1) <= N_ && std::abs(k2) <= N_; }
  int index(int k1, int k2) const { return (k1 + N_) * side() + (k2 + N_); }
  int k1(int idx) const { return idx / side() - N_; }
  int k2(int idx) const { return idx % side() - N_; }

  /// (1 + |k|^2)^power for every mode.
  Eigen::VectorXd q_power(double power) const;

 private:
  int N_;
};

/// Coefficients of a trigonometric polynomial on T^2 in the orthonormal basis
/// e^{i k.x} / (2 pi), so the L^2 norm is the coefficient 2-norm.
struct SpectralField {
  int N = 0;
  Eigen::VectorXcd coeffs;

  SpectralField() = default;
  SpectralField(int n, Eigen::VectorXcd c);

  static SpectralField zeros(int n);
  static SpectralField single_mode(int n, int k1, int k2, cplx value = 1.0);

  ModeSet modes() const { return ModeSet(N); }
  cplx& at(int k1, int k2) { return coeffs[modes().index(k1, k2)]; }
  cplx at(int k1, int k2) const { return coeffs[modes().index(k1, k2)]; }
  double l2_norm() const { return coeffs.norm(); }
};

/// ||u||_s = ||Q^{s/2} u|| with Q = I - Laplacian.
double sobolev_norm(const SpectralField& u, double s);
double sobolev_norm(const Eigen::VectorXcd& coeffs, int N, double s);

}  // namespace iwave
