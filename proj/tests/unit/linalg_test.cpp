#include <cmath>

#include "doctest.h"

#include "iwave/linalg.hpp"

using namespace iwave;

TEST_SUITE("linalg") {

TEST_CASE("expm1_rel matches (e^z - 1)/z away from zero and 1 at zero") {
  CHECK(std::abs(expm1_rel(0.0) - 1.0) < 1e-16);
  for (cplx z : {cplx(2.0, 1.0), cplx(-3.0, 0.5), cplx(0.0, 7.0)})
    CHECK(std::abs(expm1_rel(z) - (std::exp(z) - 1.0) / z) < 1e-14 * std::abs(expm1_rel(z)));
  const cplx tiny(1e-9, 2e-9);
  CHECK(std::abs(expm1_rel(tiny) - (1.0 + tiny / 2.0 + tiny * tiny / 6.0)) < 1e-16);
  // Series branch against a long-double reference.
  for (cplx z : {cplx(0.3, -0.2), cplx(-0.49, 0.0), cplx(0.01, 0.02)}) {
    std::complex<long double> zl(z.real(), z.imag());
    const auto ref = (std::exp(zl) - 1.0L) / zl;
    CHECK(std::abs(expm1_rel(z) - cplx(double(ref.real()), double(ref.imag()))) < 1e-15);
  }
}

TEST_CASE("Gauss-Legendre is exact to degree 2n-1") {
  const QuadratureRule& r = gauss_legendre(8);
  for (int d = 0; d <= 15; ++d) {
    double s = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], d);
    CHECK(s == doctest::Approx(d % 2 ? 0.0 : 2.0 / (d + 1)).epsilon(1e-14));
  }
}

TEST_CASE("GMRES solves a non-normal system") {
  const int n = 40;
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(n, n) * cplx(2.0, -0.5);
  for (int i = 0; i + 1 < n; ++i) A(i, i + 1) = 0.7;
  Eigen::VectorXcd b = Eigen::VectorXcd::LinSpaced(n, 1.0, 2.0);
  const auto res = gmres([&](const Eigen::VectorXcd& v) { return Eigen::VectorXcd(A * v); },
                         [](const Eigen::VectorXcd& v) { return v; }, b, 1e-12);
  CHECK(res.converged);
  CHECK((A * res.x - b).norm() <= 1e-11 * b.norm());
}

TEST_CASE("Lanczos singular value matches the SVD") {
  Eigen::MatrixXcd B(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) B(i, j) = cplx(std::sin(i + 2.0 * j), std::cos(3.0 * i - j));
  const auto est = largest_singular_value([&](const Eigen::VectorXcd& v) { return Eigen::VectorXcd(B * v); },
                                          [&](const Eigen::VectorXcd& v) { return Eigen::VectorXcd(B.adjoint() * v); },
                                          6);
  const double ref = Eigen::JacobiSVD<Eigen::MatrixXcd>(B).singularValues()(0);
  CHECK(est.value == doctest::Approx(ref).epsilon(1e-10));
}

TEST_CASE("shifted solver agrees with a fresh LU for every shift") {
  const int n = 12;
  Eigen::MatrixXcd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = cplx(std::cos(i * j + 0.3), i == j ? -0.2 : 0.05 * std::sin(i - j));
  const ShiftedSolver S(M);
  const Eigen::VectorXcd b = Eigen::VectorXcd::LinSpaced(n, -1.0, 1.0);
  for (cplx z : {cplx(0.1, 0.0), cplx(-2.0, 1.0), cplx(0.5, -3.0)}) {
    const Eigen::MatrixXcd shifted = M - z * Eigen::MatrixXcd::Identity(n, n);
    const Eigen::VectorXcd ref = shifted.fullPivLu().solve(b);
    CHECK((S.solve(z, b) - ref).norm() <= 1e-11 * ref.norm());
  }
}

TEST_CASE("fit_slope recovers a power law") {
  std::vector<double> x, y;
  for (int i = 0; i < 5; ++i) {
    x.push_back(0.5 * i);
    y.push_back(-0.25 + 1.5 * 0.5 * i);
  }
  CHECK(fit_slope(x, y) == doctest::Approx(1.5));
}

}
