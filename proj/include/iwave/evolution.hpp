#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "iwave/quantize.hpp"
#include "iwave/resolvent.hpp"

namespace iwave {

/// Per-block eigendecomposition of P_nu = P - i nu Q for functional calculus.
/// Uses the Hermitian solver when nu = 0.
class ViscousEigenbasis {
 public:
  ViscousEigenbasis(const TruncatedOperator& P, const TruncatedOperator& Q, double nu,
                    std::size_t budget = kDenseBudget);

  /// g(P_nu) v.
  Eigen::VectorXcd apply(const std::function<cplx(cplx)>& g, const Eigen::VectorXcd& v) const;
  std::vector<cplx> eigenvalues() const;
  double nu() const { return nu_; }
  int N() const { return N_; }

 private:
  struct Block {
    std::vector<int> modes;
    Eigen::VectorXcd values;
    Eigen::MatrixXcd vectors;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu;
    bool unitary = false;
  };
  int N_;
  double nu_;
  std::vector<Block> blocks_;
};

enum class Backend { Auto, Eigenbasis, Splitting };

struct PropagateOptions {
  Backend backend = Backend::Auto;
  /// Run both backends and compare when the eigenbasis is available.
  bool cross_check = false;
  double cross_tol = 1e-6;
  /// Relative change between successive Richardson-extrapolated splittings.
  double split_tol = 1e-8;
  double initial_step = 0.05;
  int max_doublings = 14;
  std::size_t dense_budget = kDenseBudget;
};

/// Zero-data solution of i u' = P_nu u + f e^{-i omega0 t}:
///   u(t) = (P_nu - omega0)^{-1} (e^{-itP_nu} - e^{-i omega0 t}) f.
/// Throws BackendDisagreement when a requested cross-check fails.
SpectralField propagate(const TruncatedOperator& P, const TruncatedOperator& Q, double nu, const SpectralField& f,
                        double omega0, double t, const PropagateOptions& opts = {});

/// e^{-itP_nu} v with the selected backend.
SpectralField semigroup(const TruncatedOperator& P, const TruncatedOperator& Q, double nu, double t,
                        const SpectralField& v, const PropagateOptions& opts = {});

struct ContourParams {
  double delta = 0.1;
  /// Cutoff plateau as a fraction of delta; the band between gets finer panels.
  double inner_fraction = 0.5;
  double beta = 0.7853981633974483;
  /// 0 selects the smallest r with e^{-r sin(beta) t} < 1e-16.
  double r_max = 0.0;
  int n_quad = 32;
  /// Bound on the discarded ray tails relative to ||f||.
  double tail_tol = 1e-10;
  unsigned jobs = 1;
};

struct ContourNode {
  cplx z;
  cplx weight;  // quadrature weight times dz/dparameter, orientation included
  enum Part { RayPlus, RayMinus, Segment } part;
};

/// Counter-clockwise contour around the spectrum: the ray a + r e^{-i beta}
/// inward, the segment [a, -a] with a = ||P|| + delta, then -a - r e^{i beta}
/// outward. Times t_min, t_max bound the times the nodes will serve.
std::vector<ContourNode> build_contour(double norm_P, double nu, double t_min, double t_max,
                                       const ContourParams& params);

/// Estimated ray-tail contribution relative to ||f|| for a given r_max.
double contour_tail_estimate(const ContourParams& params, double r_max, double t);

/// e^{-itP_nu} f = -(2 pi i)^{-1} int_Gamma (P_nu - z)^{-1} e^{-izt} f dz.
SpectralField semigroup_contour(const TruncatedOperator& P, const TruncatedOperator& Q, double nu, double t,
                                const SpectralField& f, const ContourParams& params = {});

enum class DecompositionPath { Subtraction, DirectQuadrature };

struct DecompositionOptions {
  DecompositionPath path = DecompositionPath::Subtraction;
  /// Also evaluate e by the other route and record the difference.
  bool cross_check = false;
  ContourParams contour;
  std::size_t dense_budget = kDenseBudget;
};

struct DecompositionResult {
  SpectralField u_nu_t;
  SpectralField u_inf;
  SpectralField b;
  SpectralField e;
  double t = 0.0;
  double nu = 0.0;
  std::map<std::string, double> norms;
  /// ||u_nu_t - (u_inf + b + e)|| / ||u_nu_t||.
  double identity_error = 0.0;
  /// ||b_quad + e_quad - e^{-itP_nu} P_nu^{-1} f|| relative to the largest of the three, when both were computed.
  double quadrature_defect = std::numeric_limits<double>::quiet_NaN();
  /// ||e_subtraction - e_direct|| / ||e||, when cross-checked.
  double path_difference = std::numeric_limits<double>::quiet_NaN();
};

DecompositionResult decompose(const TruncatedOperator& P, const TruncatedOperator& Q, double nu, double t,
                              const SpectralField& f, double delta, double inner_fraction,
                              const DecompositionOptions& opts = {});

/// P - omega as an operator of the same kind.
TruncatedOperator shift_operator(const TruncatedOperator& P, double omega);

struct TimescaleOptions {
  /// Frequency of the forcing; the scan works with P - omega0.
  double omega0 = 0.03;
  double delta = 0.1;
  double inner_fraction = 0.5;
  int points_per_decade = 16;
  /// t-grid around t* = nu^{-1/3-delta1} spans [lo * t*, hi * t*].
  double window_lo = 0.5;
  double window_hi = 2.0;
  /// Convergence window (nu^{-1/3-alpha}, T_max); T_max = 0 picks N / (2 max|d_x p|).
  bool convergence_window = true;
  double alpha = 0.05;
  double T_max = 0.0;
  double max_spatial_gradient = 0.0;
  bool stationary_reference = true;
  std::vector<double> stationary_nus;
  ContourParams contour;
  unsigned jobs = 1;
  bool hypothesis_verified = false;
  std::size_t dense_budget = kDenseBudget;
};

struct TimescaleRecord {
  std::string symbol;
  int N = 0;
  double nu = 0.0;
  double t = 0.0;
  double norm_e_s = std::numeric_limits<double>::quiet_NaN();
  double norm_b_L2 = std::numeric_limits<double>::quiet_NaN();
  double norm_u_minus_ref_s = std::numeric_limits<double>::quiet_NaN();
  double norm_u_minus_stationary_s = std::numeric_limits<double>::quiet_NaN();
  /// "decay" for the t ~ nu^{-1/3-delta1} grid, "convergence" for the convergence window.
  std::string window_flag;
};

struct TimescaleResult {
  std::vector<TimescaleRecord> records;
  double delta1 = 0.0;
  double s = -0.6;
  /// -slope of log ||e_nu(t)||_s against log t on the decay grids, pooled
  /// over nu with a separate intercept per nu.
  double delta2 = std::numeric_limits<double>::quiet_NaN();
  /// -slope of log ||e_nu(t*)||_s against log t* across nu.
  double delta2_tstar = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::pair<double, double>> e_at_tstar;
  double max_b_over_f1 = 0.0;
  std::vector<std::pair<double, double>> sup_discrepancy;
  std::vector<std::pair<double, double>> sup_stationary;
  bool stationary_cauchy = true;
  double T_max = 0.0;
  std::vector<std::string> flags;
};

/// Dissipation-onset scan over nu_grid for the forcing f.
TimescaleResult timescale_scan(const TruncatedOperator& P, const TruncatedOperator& Q, const SpectralField& f,
                               double delta1, const std::vector<double>& nu_grid, double s,
                               const TimescaleOptions& opts = {});

void write_timescale_csv(const TimescaleResult& result, std::ostream& os);

struct ContractionReport {
  std::vector<double> times;
  std::vector<double> norms;
  std::vector<double> bounds;
  double max_ratio = 0.0;  // max norm / bound
  bool holds = true;
};

/// ||e^{-itP_nu} f|| <= e^{-t nu} ||f|| (1 + slack) on t_grid.
ContractionReport contraction_check(const TruncatedOperator& P, const TruncatedOperator& Q, double nu,
                                    const SpectralField& f, const std::vector<double>& t_grid,
                                    double slack = 1e-8);

/// Logarithmic grid with the given density, including both ends.
std::vector<double> log_grid(double lo, double hi, int points_per_decade);

}  // namespace iwave
