#include <cmath>

#include "doctest.h"

#include "iwave/modes.hpp"

using namespace iwave;

TEST_SUITE("modes") {

TEST_CASE("index is a bijection onto [0, (2N+1)^2)") {
  const ModeSet m(3);
  CHECK(m.size() == 49);
  for (int i = 0; i < static_cast<int>(m.size()); ++i) CHECK(m.index(m.k1(i), m.k2(i)) == i);
  CHECK(m.index(-3, -3) == 0);
  CHECK(m.index(0, 0) == 24);
  CHECK(m.index(1, -2) == (1 + 3) * 7 + (-2 + 3));
}

TEST_CASE("sobolev norm of a single mode") {
  const SpectralField u = SpectralField::single_mode(4, 2, -1, cplx(0.0, 3.0));
  for (double s : {-1.0, -0.6, 0.0, 1.0}) CHECK(sobolev_norm(u, s) == doctest::Approx(3.0 * std::pow(6.0, s / 2)));
}

TEST_CASE("sobolev norms are monotone in s") {
  SpectralField u = SpectralField::zeros(3);
  for (Eigen::Index i = 0; i < u.coeffs.size(); ++i) u.coeffs[i] = cplx(std::sin(1.0 + i), std::cos(2.0 * i));
  CHECK(sobolev_norm(u, -1.0) <= sobolev_norm(u, -0.6));
  CHECK(sobolev_norm(u, -0.6) <= sobolev_norm(u, 0.0));
  CHECK(sobolev_norm(u, 0.0) == doctest::Approx(u.l2_norm()));
}

TEST_CASE("q_power is the viscosity multiplier") {
  const ModeSet m(2);
  const Eigen::VectorXd q = m.q_power(1.0);
  CHECK(q[m.index(2, 1)] == doctest::Approx(6.0));
  CHECK(q[m.index(0, 0)] == doctest::Approx(1.0));
}

}
