#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "iwave/symbol.hpp"

namespace iwave {

/// Autonomous flow on (x, theta, rho) whose field does not depend on rho.
class FlowModel {
 public:
  virtual ~FlowModel() = default;
  virtual FlowTangent field(const FlowPoint& q) const = 0;
  /// Conserved quantity checked for drift; NaN when the model has none.
  virtual double energy(const FlowPoint& q) const = 0;
};

/// Rescaled Hamilton flow of a symbol; time_sign = -1 gives the reversed flow.
class SymbolFlow : public FlowModel {
 public:
  explicit SymbolFlow(const HomogeneousSymbol& sym, double time_sign = 1.0) : sym_(sym), sign_(time_sign) {}
  FlowTangent field(const FlowPoint& q) const override;
  double energy(const FlowPoint& q) const override { return sym_(q.x1, q.x2, q.theta); }
  const HomogeneousSymbol& symbol() const { return sym_; }

 private:
  HomogeneousSymbol sym_;
  double sign_;
};

/// theta' = -sin(theta), rho' = cos(theta) with x frozen: the transverse
/// dynamics near a radial sink, with attractor theta = 0.
class CircleToyFlow : public FlowModel {
 public:
  FlowTangent field(const FlowPoint& q) const override;
  double energy(const FlowPoint&) const override;
};

struct Trajectory {
  std::vector<FlowPoint> points;
  std::vector<double> times;
  double energy = 0.0;
  double max_drift = 0.0;
  double dt_used = 0.0;
};

struct FlowOptions {
  double drift_tol = 1e-6;
  double min_dt = 1e-12;
  /// Keep every n-th step.
  std::size_t store_every = 1;
};

/// Fixed-step 8th-order integration of the flow for time T (negative T runs
/// backward). The step is halved until the energy drift stays within
/// tolerance; StepUnderflow below min_dt. Stored angles are reduced mod 2pi.
Trajectory integrate_flow(const FlowModel& model, const FlowPoint& start, double T, double dt,
                          const FlowOptions& opts = {});
Trajectory integrate_flow(const HomogeneousSymbol& sym, const FlowPoint& start, double T, double dt,
                          const FlowOptions& opts = {});

enum class SetKind { Attractor, Repulsor, Degenerate };
const char* to_string(SetKind kind);

struct InvariantSet {
  SetKind kind = SetKind::Degenerate;
  std::vector<FlowPoint> representatives;
  double radial_rate = 0.0;
  double beta = 0.0;
  double energy = 0.0;
};

struct SampleOutcome {
  FlowPoint start;
  bool forward_converged = false;   // forward orbit ends in an attractor
  bool backward_converged = false;  // backward orbit ends in a repulsor
  bool on_attractor = false;
  bool on_repulsor = false;
};

struct CoverageReport {
  std::size_t n_samples = 0;
  double forward_coverage = 0.0;
  double backward_coverage = 0.0;
  /// Fraction whose forward orbit reaches an attractor or backward orbit a repulsor.
  double basin_coverage = 0.0;
  std::size_t no_convergence = 0;
  double horizon = 0.0;
  std::size_t clusters = 0;
};

struct DetectionOptions {
  std::uint64_t seed = 1;
  double dt = 1e-2;
  double radius = 0.05;
  double T_max = 3200.0;
  double tail_window = 10.0;
  double tail_spacing = 0.2;
  unsigned jobs = 1;
  /// Run everything on the reversed flow.
  bool reverse_time = false;
};

struct Detection {
  std::vector<InvariantSet> sets;
  CoverageReport report;
  std::vector<SampleOutcome> samples;

  const InvariantSet* find(SetKind kind) const;
};

/// Uniform x and a uniformly chosen root theta of p(x, theta) = omega.
/// Throws NotRegularValue where |(d_x p, d_theta p)| < 1e-8.
std::vector<FlowPoint> sample_energy_shell(const HomogeneousSymbol& sym, double omega, std::size_t n,
                                           std::uint64_t seed);

Detection detect_invariant_sets(const HomogeneousSymbol& sym, double omega, std::size_t n_samples, double T,
                                const DetectionOptions& opts = {});

struct EscapeSample {
  FlowPoint point;
  double energy = 0.0;
  double value = 0.0;      // k at the point
  double derivative = 0.0; // X k by centered differences along the flow
  double m = 0.0;          // X k predicted by the construction
  bool converged = false;
  double shift = 0.0;      // s in k o Phi_s, nonzero only when used
};

struct EscapeOptions {
  std::size_t n_samples = 200;
  std::uint64_t seed = 11;
  double r_in = 0.1;
  double r_out = 0.2;
  double dt = 1e-2;
  double T_max = 400.0;
  double increment_tol = 1e-8;
  double fd_step = 0.05;
  unsigned jobs = 1;
  /// Allowed fraction of samples whose limit does not settle.
  double max_unconverged = 0.01;
};

/// Degree-1 escape function sampled on the basins of the attractors, values
/// stored at rho = 0 and extended by k = e^rho k(rho = 0).
struct EscapeFunction {
  std::vector<EscapeSample> samples;
  double beta = 0.0;
  int degree = 1;
  /// Fraction of converged samples with X k > beta / 2.
  double monotone_fraction = 0.0;
  std::size_t unconverged = 0;
};

/// Limit construction k2 = lim (k1 o Phi_t - int_0^t m o Phi_s ds) for one model.
class EscapeConstruction {
 public:
  using Seed = std::function<double(const FlowPoint&)>;

  /// seed0 and m0 are the rho = 0 profiles of k1 and m.
  EscapeConstruction(std::shared_ptr<const FlowModel> model, Seed seed0, Seed m0, EscapeOptions opts);

  /// k2 at q; throws LimitNotConverged.
  double value(const FlowPoint& q) const;
  /// k2 o Phi_s at q.
  double shifted_value(const FlowPoint& q, double s) const;
  /// Centered difference of k2 along the flow.
  double derivative(const FlowPoint& q) const;
  double m(const FlowPoint& q) const { return std::exp(q.rho) * m0_(q); }

 private:
  std::shared_ptr<const FlowModel> model_;
  Seed seed0_;
  Seed m0_;
  EscapeOptions opts_;
};

/// Smooth bump: 1 for d <= r_in, 0 for d >= r_out.
double radial_bump(double d, double r_in, double r_out);

/// Seed k1 = e^rho b(dist(q, attractor)), m = e^rho (b rho' + (1 - b) beta).
EscapeFunction build_escape_function(const HomogeneousSymbol& sym, const std::vector<InvariantSet>& sets,
                                     double delta, const EscapeOptions& opts = {});

struct OmegaBreakdown {
  double omega = 0.0;
  double coverage = 0.0;
  double ss_fraction = 0.0;
  bool has_attractor = false;
  bool has_repulsor = false;
  double beta_attractor = 0.0;
  double beta_repulsor = 0.0;
};

struct SimpleStructureReport {
  std::string verdict;
  double coverage = 0.0;
  double ss_fraction = 0.0;
  std::vector<OmegaBreakdown> per_omega;
  std::vector<InvariantSet> attractors;
};

struct SimpleStructureOptions {
  int n_omega = 5;
  double T = 200.0;
  double min_coverage = 0.99;
  DetectionOptions detection;
};

/// Runs detection on an omega grid in [-delta, delta] with n_samples split
/// across it; n_samples = 0 yields verdict "insufficient-data".
SimpleStructureReport verify_simple_structure(const HomogeneousSymbol& sym, double delta, std::size_t n_samples,
                                              const SimpleStructureOptions& opts = {});

}  // namespace iwave
