#include "iwave/modes.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace iwave {

ModeSet::ModeSet(int N) : N_(N) {
  if (N < 0) throw std::invalid_argument("truncation N must be non-negative");
}

Eigen::VectorXd ModeSet::q_power(double power) const {
  Eigen::VectorXd w(size());
  for (int i = 0; i < static_cast<int>(size()); ++i) {
    const double q = 1.0 + static_cast<double>(k1(i)) * k1(i) + static_cast<double>(k2(i)) * k2(i);
    w[i] = power == 0.0 ? 1.0 : std::pow(q, power);
  }
  return w;
}

SpectralField::SpectralField(int n, Eigen::VectorXcd c) : N(n), coeffs(std::move(c)) {
  if (static_cast<std::size_t>(coeffs.size()) != ModeSet(N).size())
    throw std::invalid_argument("coefficient count does not match (2N+1)^2");
}

SpectralField SpectralField::zeros(int n) {
  return SpectralField(n, Eigen::VectorXcd::Zero(ModeSet(n).size()));
}

SpectralField SpectralField::single_mode(int n, int k1, int k2, cplx value) {
  SpectralField u = zeros(n);
  u.at(k1, k2) = value;
  return u;
}

double sobolev_norm(const Eigen::VectorXcd& coeffs, int N, double s) {
  const Eigen::VectorXd w = ModeSet(N).q_power(s);
  return std::sqrt((w.array() * coeffs.array().abs2()).sum());
}

double sobolev_norm(const SpectralField& u, double s) { return sobolev_norm(u.coeffs, u.N, s); }

}  // namespace iwave
