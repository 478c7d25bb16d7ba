#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <vector>

namespace iwave {

using cplx = std::complex<double>;
using LinearMap = std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>;

/// (e^z - 1) / z, accurate near 0.
cplx expm1_rel(cplx z);

/// Gauss-Legendre nodes and weights on [-1, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const QuadratureRule& gauss_legendre(int n);

struct GmresResult {
  Eigen::VectorXcd x;
  double relative_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Restarted GMRES with right preconditioning, A M^{-1} y = b, x = M^{-1} y.
GmresResult gmres(const LinearMap& A, const LinearMap& precond, const Eigen::VectorXcd& b, double tol,
                  int restart = 60, int max_iter = 4000);

struct NormEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Largest singular value of B from Lanczos on B^* B with full
/// reorthogonalization. Deterministic start vector.
NormEstimate largest_singular_value(const LinearMap& B, const LinearMap& B_adjoint, Eigen::Index dim,
                                    double tol = 1e-10, int max_iter = 400);

/// Solves (M - z I) x = b for many shifts z after one Hessenberg reduction.
class ShiftedSolver {
 public:
  explicit ShiftedSolver(const Eigen::MatrixXcd& M);
  Eigen::VectorXcd solve(cplx z, const Eigen::VectorXcd& b) const;
  Eigen::Index size() const { return H_.rows(); }

 private:
  Eigen::MatrixXcd H_;
  Eigen::MatrixXcd Q_;
};

/// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace iwave
