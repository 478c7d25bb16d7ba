#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"

#include "iwave/errors.hpp"
#include "iwave/resolvent.hpp"
#include "iwave/symbol.hpp"

using namespace iwave;

namespace {

Eigen::MatrixXcd dense_resolvent(const TruncatedOperator& P, const TruncatedOperator& Q, cplx z, double nu) {
  Eigen::MatrixXcd M = P.to_dense();
  M.diagonal() -= cplx(0.0, nu) * Q.diagonal();
  M.diagonal().array() -= z;
  return M.inverse();
}

double svd_norm(const Eigen::MatrixXcd& A, const ModeSet& m, double a, double b) {
  const Eigen::MatrixXcd B = m.q_power(b / 2).asDiagonal() * A * m.q_power(-a / 2).asDiagonal();
  return Eigen::BDCSVD<Eigen::MatrixXcd>(B).singularValues()(0);
}

}  // namespace

TEST_SUITE("resolvent") {

TEST_CASE("one-mode control attains the bound exactly") {
  const auto P = assemble_P(free_symbol(), 1);
  const auto Q = assemble_Q(1);
  for (double nu : {0.1, 0.01}) {
    const La1Report r = check_la1(P, Q, 0.0, nu);
    CHECK(r.measured == doctest::Approx(1.0 / nu).epsilon(1e-12));
    CHECK(r.bound == doctest::Approx(1.0 / nu));
  }
}

TEST_CASE("H^-1 to H^1 bound holds on the catalog") {
  const auto Q = assemble_Q(6);
  for (const auto& sym : builtin_library()) {
    const auto P = assemble_P(sym, 6);
    for (double omega : {-0.3, 0.0, 0.1})
      for (double nu : {0.2, 0.02}) {
        const La1Report r = check_la1(P, Q, omega, nu);
        CHECK(r.measured <= r.bound * (1.0 + 1e-10));
        CHECK(r.identity_error < 1e-10);
      }
  }
}

TEST_CASE("solve_resolvent inverts the viscous operator") {
  const auto P = assemble_P(shear_symbol(0.3), 5);
  const auto Q = assemble_Q(5);
  SpectralField f = SpectralField::zeros(5);
  for (Eigen::Index i = 0; i < f.coeffs.size(); ++i) f.coeffs[i] = std::exp(-0.1 * i);
  const SpectralField u = solve_resolvent(P, Q, 0.2, 0.03, f);
  const Eigen::VectorXcd back = viscous_apply(P, Q, 0.03, 0.2, u.coeffs);
  CHECK((back - f.coeffs).norm() <= 1e-10 * f.coeffs.norm());
}

TEST_CASE("matrix-free and dense resolvents agree") {
  AssemblyOptions mf;
  mf.force_matrix_free = true;
  const auto Pd = assemble_P(shear_symbol(0.3), 4);
  const auto Pm = assemble_P(shear_symbol(0.3), 4, mf);
  const auto Q = assemble_Q(4);
  SpectralField f = SpectralField::single_mode(4, 1, 2);
  const auto a = solve_resolvent(Pd, Q, 0.1, 0.05, f);
  const auto b = solve_resolvent(Pm, Q, 0.1, 0.05, f);
  CHECK((a.coeffs - b.coeffs).norm() <= 1e-9 * a.coeffs.norm());
}

TEST_CASE("operator_norm matches a dense SVD for weighted norms") {
  const int N = 3;
  const ModeSet m(N);
  const auto P = assemble_P(two_param_symbol(0.3, 0.1, 0.0), N);
  const auto Q = assemble_Q(N);
  const cplx z(0.05, 0.0);
  const auto R = resolvent_operator(P, Q, z, 0.04);
  const Eigen::MatrixXcd Rd = dense_resolvent(P, Q, z, 0.04);
  for (const auto& [a, b] : {std::pair{0.0, 0.0}, {-0.6, -0.6}, {0.0, -0.6}, {-1.0, 1.0}})
    CHECK(operator_norm(R, a, b) == doctest::Approx(svd_norm(Rd, m, a, b)).epsilon(1e-10));
}

TEST_CASE("spectrum lies in the damped strip") {
  const auto P = assemble_P(shear_symbol(0.3), 5);
  const auto Q = assemble_Q(5);
  const double norm_P = operator_norm(P, 0.0, 0.0);
  for (double nu : {0.3, 0.05})
    for (cplx l : spectrum_Pnu(P, Q, nu)) {
      CHECK(l.imag() <= -nu + 1e-10);
      CHECK(std::abs(l.real()) <= norm_P + 1e-10);
    }
}

TEST_CASE("numerical-range bound uses only the applicable terms") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(resolvent_estimate_bound(cplx(0.0, -0.5), 1.0, 0.1) == inf);
  CHECK(resolvent_estimate_bound(cplx(3.0, -0.5), 1.0, 0.1) == doctest::Approx(0.5));
  CHECK(resolvent_estimate_bound(cplx(0.0, 0.4), 1.0, 0.1) == doctest::Approx(2.0));
  CHECK(resolvent_estimate_bound(cplx(1.5, 0.4), 1.0, 0.1) == doctest::Approx(2.0));
  CHECK(resolvent_estimate_bound(cplx(5.0, 0.4), 1.0, 0.1) == doctest::Approx(0.25));
}

TEST_CASE("limiting absorption on a diagonal operator") {
  const auto P = assemble_P(free_symbol(), 3);
  const SpectralField f = SpectralField::single_mode(3, 1, 1);
  const double omega = 0.2;  // not an eigenvalue: k2/|k| = 1/sqrt(2) here
  const auto r = limiting_resolvent(P, omega, f, {0.004, 0.002, 0.001, 0.0005});
  const cplx expected = 1.0 / (1.0 / std::sqrt(2.0) - omega);
  CHECK(std::abs(r.field.coeffs[ModeSet(3).index(1, 1)] - expected) < 1e-4);
  CHECK(r.cauchy);
  CHECK_THROWS_AS(limiting_resolvent(P, 0.0, f, {0.1, 0.05}), NearEigenvalue);
}

TEST_CASE("scaling scan on the diagonal control has slope one") {
  const auto P = assemble_P(free_symbol(), 4);
  const auto Q = assemble_Q(4);
  ScalingScanOptions o;
  const auto res = resolvent_scaling_scan(P, Q, {0.0}, {0.1, 0.01, 0.001}, -0.6, o);
  CHECK(res.slope_Hs == doctest::Approx(1.0).epsilon(1e-6));
  bool flagged = false;
  for (const auto& f : res.flags) flagged = flagged || f == "hypothesis-unverified";
  CHECK(flagged);
  std::ostringstream os;
  write_scan_csv(res, os);
  CHECK(os.str().rfind("symbol,N,omega,nu", 0) == 0);
}

}
