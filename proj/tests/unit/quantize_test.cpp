#include <cmath>
#include <filesystem>

#include "doctest.h"

#include "iwave/errors.hpp"
#include "iwave/modes.hpp"
#include "iwave/quantize.hpp"
#include "iwave/symbol.hpp"

using namespace iwave;

namespace {

/// Entrywise collocation of the quantized matrix: midpoint rule on a G x G
/// grid, exact for the trigonometric polynomials of the catalog.
Eigen::MatrixXcd collocation_oracle(const HomogeneousSymbol& p, int N, int G = 32) {
  const ModeSet m(N);
  const int n = static_cast<int>(m.size());
  Eigen::MatrixXcd B(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      const bool zero = m.k1(k) == 0 && m.k2(k) == 0;
      const double th = zero ? 0.0 : std::atan2(m.k2(k), m.k1(k));
      cplx acc = 0.0;
      for (int a = 0; a < G; ++a)
        for (int b = 0; b < G; ++b) {
          const double x1 = kTwoPi * a / G, x2 = kTwoPi * b / G;
          double v = 0.0;
          if (zero)
            for (int r = 0; r < 256; ++r) v += p(x1, x2, kTwoPi * r / 256) / 256.0;
          else
            v = p(x1, x2, th);
          acc += v * std::exp(cplx(0.0, -((m.k1(j) - m.k1(k)) * x1 + (m.k2(j) - m.k2(k)) * x2)));
        }
      B(j, k) = acc / static_cast<double>(G * G);
    }
  return 0.5 * (B + B.adjoint());
}

HomogeneousSymbol undeclared_shear() {
  const auto s = shear_symbol(0.3);
  return HomogeneousSymbol(
      "shear-generic", {}, [s](double a, double b, double t) { return s(a, b, t); },
      [s](double a, double b, double t) { return s.grad_x(a, b, t); },
      [s](double a, double b, double t) { return s.grad_theta(a, b, t); });
}

Eigen::VectorXcd test_vector(std::size_t n) {
  Eigen::VectorXcd v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = cplx(std::cos(0.7 * i), std::sin(1.3 * i + 0.2));
  return v;
}

}  // namespace

TEST_SUITE("quantize") {

TEST_CASE("free symbol quantizes to the diagonal k2/|k|") {
  const auto P = assemble_P(free_symbol(), 3);
  REQUIRE(P.kind() == OperatorKind::Diagonal);
  const ModeSet m(3);
  CHECK(std::abs(P.diagonal()[m.index(0, 0)]) < 1e-15);
  CHECK(P.diagonal()[m.index(0, 2)].real() == doctest::Approx(1.0));
  CHECK(P.diagonal()[m.index(3, -3)].real() == doctest::Approx(-3.0 / std::sqrt(18.0)));
}

TEST_CASE("entries match the collocation oracle at N = 2") {
  for (const auto& sym : builtin_library()) {
    const auto P = assemble_P(sym, 2);
    const Eigen::MatrixXcd ref = collocation_oracle(sym, 2);
    CHECK((P.to_dense() - ref).norm() <= 1e-12 * ref.norm());
  }
}

TEST_CASE("separable and generic routes agree") {
  AssemblyOptions g;
  g.force_generic = true;
  for (const auto& sym : builtin_library()) {
    const Eigen::MatrixXcd a = assemble_P(sym, 4).to_dense();
    const Eigen::MatrixXcd b = assemble_P(sym, 4, g).to_dense();
    CHECK((a - b).norm() <= 1e-12 * std::max(1.0, a.norm()));
  }
}

TEST_CASE("matrix-free apply agrees with the dense operator") {
  AssemblyOptions mf;
  mf.force_matrix_free = true;
  for (const auto& sym : builtin_library()) {
    const auto D = assemble_P(sym, 5);
    const auto M = assemble_P(sym, 5, mf);
    CHECK(M.is_matrix_free());
    const Eigen::VectorXcd v = test_vector(D.dim());
    CHECK((D.apply(v) - M.apply(v)).norm() <= 1e-12 * v.norm());
    CHECK((D.apply_adjoint(v) - M.apply_adjoint(v)).norm() <= 1e-12 * v.norm());
  }
}

TEST_CASE("P is Hermitian and bounded by sup|p|") {
  for (const auto& sym : builtin_library()) {
    const Eigen::MatrixXcd A = assemble_P(sym, 4).to_dense();
    CHECK((A - A.adjoint()).norm() <= 1e-13 * std::max(1.0, A.norm()));
  }
  const auto P = assemble_P(shear_symbol(0.3), 6);
  CHECK(P.info.symbol == "shear");
  CHECK(P.info.symmetrization_defect >= 0.0);
}

TEST_CASE("shear couples modes along k1 only") {
  const auto P = assemble_P(shear_symbol(0.3), 4);
  REQUIRE(P.kind() == OperatorKind::Dense);
  CHECK(P.max_block_dim() == 9);
}

TEST_CASE("non-separable symbol above the budget is refused") {
  AssemblyOptions small;
  small.dense_budget = 4;
  CHECK_THROWS_AS(assemble_P(undeclared_shear(), 4, small), TooLargeForDense);
  CHECK_THROWS_AS(assemble_P(free_symbol(), 0), std::invalid_argument);
}

TEST_CASE("Q multiplier") {
  const auto Q = assemble_Q(2);
  const ModeSet m(2);
  CHECK(Q.kind() == OperatorKind::Diagonal);
  CHECK(Q.diagonal()[m.index(-2, 1)].real() == doctest::Approx(6.0));
}

TEST_CASE("smooth step and cutoff profile") {
  CHECK(smooth_step(-1.0) == 0.0);
  CHECK(smooth_step(0.0) == 0.0);
  CHECK(smooth_step(1.0) == 1.0);
  CHECK(smooth_step(0.5) == doctest::Approx(0.5));
  CHECK(smooth_step(0.3) + smooth_step(0.7) == doctest::Approx(1.0));
  double prev = 0.0;
  for (int i = 1; i < 100; ++i) {
    const double v = smooth_step(i / 100.0);
    CHECK(v >= prev);
    prev = v;
  }
  CHECK(cutoff_profile(0.04, 0.1, 0.5) == 1.0);
  CHECK(cutoff_profile(-0.05, 0.1, 0.5) == 1.0);
  CHECK(cutoff_profile(0.1, 0.1, 0.5) == 0.0);
  CHECK(cutoff_profile(0.075, 0.1, 0.5) == doctest::Approx(0.5));
}

TEST_CASE("spectral cutoffs nest") {
  const auto P = assemble_P(shear_symbol(0.3), 6);
  const SpectralCutoffs c = spectral_cutoff(P, 0.1, 0.5);
  CHECK(c.mismatch <= 1e-14);
  const HermitianEigensystem es(P);
  const Eigen::VectorXcd v = test_vector(P.dim());
  // phi(P) chi(P) = phi(P)
  CHECK((c.phi.apply(c.chi.apply(v)) - c.phi.apply(v)).norm() <= 1e-12 * v.norm());
  // phi is a function of P: it commutes with P.
  CHECK((P.apply(c.phi.apply(v)) - c.phi.apply(P.apply(v))).norm() <= 1e-12 * v.norm());
  CHECK(es.eigenvalues().size() == static_cast<Eigen::Index>(P.dim()));
}

TEST_CASE("export writes binary and metadata") {
  const auto dir = std::filesystem::temp_directory_path() / "iwave_export_test";
  std::filesystem::create_directories(dir);
  const auto P = assemble_P(shear_symbol(0.3), 2);
  export_operator(P, (dir / "P").string());
  CHECK(std::filesystem::file_size(dir / "P.bin") == 25 * 25 * 16);
  CHECK(std::filesystem::exists(dir / "P.json"));
}

}
