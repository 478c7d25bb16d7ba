#pragma once

#include <Eigen/Dense>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "iwave/linalg.hpp"
#include "iwave/quantize.hpp"

namespace iwave {

struct SolverOptions {
  std::size_t dense_budget = kDenseBudget;
  /// GMRES stopping tolerance on the relative residual.
  double tol = 1e-12;
  int restart = 80;
  int max_iter = 4000;
};

/// (P - i nu Q - z) v. Q must be diagonal.
Eigen::VectorXcd viscous_apply(const TruncatedOperator& P, const TruncatedOperator& Q, double nu, cplx z,
                               const Eigen::VectorXcd& v);

/// Solver for (P - i nu Q - z) x = b at many shifts z. Dense blocks are
/// reduced to Hessenberg form once; matrix-free operators use GMRES with the
/// diagonal preconditioner (d_k - z - i nu q_k)^{-1}.
class ResolventSolver {
 public:
  ResolventSolver(const TruncatedOperator& P, const TruncatedOperator& Q, double nu, SolverOptions opts = {});

  Eigen::VectorXcd solve(cplx z, const Eigen::VectorXcd& b) const;
  Eigen::VectorXcd apply(cplx z, const Eigen::VectorXcd& v) const { return viscous_apply(P_, Q_, nu_, z, v); }
  int N() const { return P_.N(); }
  double nu() const { return nu_; }

 private:
  struct BlockSolver {
    std::vector<int> modes;
    std::unique_ptr<ShiftedSolver> solver;
  };
  TruncatedOperator P_;
  TruncatedOperator Q_;
  double nu_;
  SolverOptions opts_;
  std::vector<BlockSolver> blocks_;
};

/// (P - omega - i nu Q)^{-1} f, relative residual below 1e-10.
/// Throws IterationStalled when the iterative path fails to get there.
SpectralField solve_resolvent(const TruncatedOperator& P, const TruncatedOperator& Q, double omega, double nu,
                              const SpectralField& f, const SolverOptions& opts = {});

/// (P - i nu Q - z)^{-1} as an operator: block inverses when P is dense or
/// diagonal, GMRES-backed otherwise.
TruncatedOperator resolvent_operator(const TruncatedOperator& P, const TruncatedOperator& Q, cplx z, double nu,
                                     const SolverOptions& opts = {});

/// ||A||_{B(H^a, H^b)} = sigma_max(Q^{b/2} A Q^{-a/2}).
double operator_norm(const TruncatedOperator& A, double a, double b, double tol = 1e-10);

struct La1Report {
  double measured = 0.0;
  double bound = 0.0;
  /// Relative error of Q^{1/2} R Q^{1/2} = (Q^{-1/2}(P - omega)Q^{-1/2} - i nu)^{-1}.
  double identity_error = 0.0;
};

La1Report check_la1(const TruncatedOperator& P, const TruncatedOperator& Q, double omega, double nu,
                    const SolverOptions& opts = {});

/// Eigenvalues of P - i nu Q, sorted by real part then imaginary part.
std::vector<cplx> spectrum_Pnu(const TruncatedOperator& P, const TruncatedOperator& Q, double nu,
                               std::size_t budget = kDenseBudget);

/// Numerical-range bound for ||(P_nu - lambda)^{-1}||_{B(L^2)}: the minimum of
/// 1/(|Re lambda| - ||P||) and 1/(Im lambda + nu) over the terms whose
/// condition holds. Infinity when neither holds.
double resolvent_estimate_bound(cplx lambda, double norm_P, double nu);

struct ScanRecord {
  std::string symbol;
  int N = 0;
  double omega = 0.0;
  double nu = 0.0;
  double s = 0.0;
  double norm_Hs = 0.0;
  double norm_L2_to_Hs = 0.0;
  double residual = 0.0;
  double coarse_norm_Hs = std::numeric_limits<double>::quiet_NaN();
  double coarse_norm_L2_to_Hs = std::numeric_limits<double>::quiet_NaN();
  bool converged = true;
  std::vector<std::string> flags;
  std::string error;
};

struct ScalingScanOptions {
  /// Operators at half the truncation, for the doubling check.
  const TruncatedOperator* P_coarse = nullptr;
  const TruncatedOperator* Q_coarse = nullptr;
  bool hypothesis_verified = false;
  double doubling_tol = 0.02;
  unsigned jobs = 1;
  SolverOptions solver;
};

struct ScalingScanResult {
  std::vector<ScanRecord> records;
  /// Slopes of log(max_omega norm) against log(1/nu) on the converged nus.
  double slope_Hs = std::numeric_limits<double>::quiet_NaN();
  double slope_L2_to_Hs = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> fit_nus;
  std::vector<std::pair<double, double>> per_omega_slope_Hs;
  std::vector<std::pair<double, double>> per_omega_slope_L2_to_Hs;
  std::vector<std::string> flags;
};

ScalingScanResult resolvent_scaling_scan(const TruncatedOperator& P, const TruncatedOperator& Q,
                                         const std::vector<double>& omega_grid, const std::vector<double>& nu_grid,
                                         double s, const ScalingScanOptions& opts = {});

void write_scan_csv(const ScalingScanResult& result, std::ostream& os);

struct LimitingOptions {
  double s = -0.6;
  double eigen_gap = 1e-8;
  bool require_cauchy = true;
  std::size_t dense_budget = kDenseBudget;
};

struct LimitingResult {
  /// Richardson-extrapolated limit in nu.
  SpectralField field;
  /// (P - omega - i nu)^{-1} f at the smallest nu.
  SpectralField last;
  /// ||u_{nu_{i+1}} - u_{nu_i}||_s.
  std::vector<double> increments;
  /// ||field - last||_s.
  double estimate = 0.0;
  bool cauchy = true;
};

/// Limiting absorption (P - omega - i0)^{-1} f with Q = I, from a decreasing nu sequence.
LimitingResult limiting_resolvent(const TruncatedOperator& P, double omega, const SpectralField& f,
                                  const std::vector<double>& nu_seq, const LimitingOptions& opts = {});

}  // namespace iwave
