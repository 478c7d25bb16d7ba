#include "iwave/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "iwave/errors.hpp"
#include "iwave/parallel.hpp"

namespace iwave {

namespace {

constexpr cplx kI(0.0, 1.0);

Eigen::VectorXcd gather(const Eigen::VectorXcd& v, const std::vector<int>& idx) {
  Eigen::VectorXcd out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

void scatter(Eigen::VectorXcd& dst, const std::vector<int>& idx, const Eigen::VectorXcd& src) {
  for (std::size_t i = 0; i < idx.size(); ++i) dst[idx[i]] = src[i];
}

const Eigen::VectorXcd& q_of(const TruncatedOperator& Q) {
  if (Q.kind() != OperatorKind::Diagonal) throw std::invalid_argument("viscosity operator must be diagonal");
  return Q.diagonal();
}

double relative_difference(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale > 0.0 ? (a - b).norm() / scale : 0.0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Eigenbasis backend

ViscousEigenbasis::ViscousEigenbasis(const TruncatedOperator& P, const TruncatedOperator& Q, double nu,
                                     std::size_t budget)
    : N_(P.N()), nu_(nu) {
  if (P.N() != Q.N()) throw std::invalid_argument("P and Q have different truncations");
  const auto& q = q_of(Q);
  switch (P.kind()) {
    case OperatorKind::MatrixFree: throw TooLargeForDense("eigenbasis backend needs a dense operator");
    case OperatorKind::Diagonal:
      for (int i = 0; i < static_cast<int>(P.dim()); ++i) {
        Block b;
        b.modes = {i};
        b.values = Eigen::VectorXcd::Constant(1, P.diagonal()[i] - kI * nu * q[i]);
        b.vectors = Eigen::MatrixXcd::Ones(1, 1);
        b.unitary = true;
        blocks_.push_back(std::move(b));
      }
      break;
    case OperatorKind::Dense:
      if (P.max_block_dim() > budget) throw TooLargeForDense("block exceeds dense budget");
      for (const auto& blk : P.blocks()) {
        Block b;
        b.modes = blk.modes;
        if (nu == 0.0 && P.hermitian()) {
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(blk.matrix);
          b.values = es.eigenvalues().cast<cplx>();
          b.vectors = es.eigenvectors();
          b.unitary = true;
        } else {
          Eigen::MatrixXcd M = blk.matrix;
          for (std::size_t i = 0; i < blk.modes.size(); ++i) M(i, i) -= kI * nu * q[blk.modes[i]];
          Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(M);
          if (es.info() != Eigen::Success) throw std::runtime_error("complex eigensolver failed");
          b.values = es.eigenvalues();
          b.vectors = es.eigenvectors();
          b.lu = b.vectors.partialPivLu();
        }
        blocks_.push_back(std::move(b));
      }
      break;
  }
}

Eigen::VectorXcd ViscousEigenbasis::apply(const std::function<cplx(cplx)>& g, const Eigen::VectorXcd& v) const {
  Eigen::VectorXcd out(v.size());
  for (const auto& b : blocks_) {
    const Eigen::VectorXcd local = gather(v, b.modes);
    Eigen::VectorXcd c = b.unitary ? Eigen::VectorXcd(b.vectors.adjoint() * local) : Eigen::VectorXcd(b.lu.solve(local));
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] *= g(b.values[i]);
    scatter(out, b.modes, b.vectors * c);
  }
  return out;
}

std::vector<cplx> ViscousEigenbasis::eigenvalues() const {
  std::vector<cplx> out;
  for (const auto& b : blocks_) out.insert(out.end(), b.values.data(), b.values.data() + b.values.size());
  return out;
}

// ---------------------------------------------------------------------------
// Splitting backend

namespace {

/// Strang splitting between the diagonal part D - i nu Q (with the forcing,
/// solved exactly) and the off-diagonal Hermitian part (Taylor exponential).
class SplittingPropagator {
 public:
  SplittingPropagator(const TruncatedOperator& P, const TruncatedOperator& Q, double nu)
      : P_(P), lambda_(P.diagonal() - kI * nu * q_of(Q)), diag_(P.diagonal()) {}

  Eigen::VectorXcd run(const Eigen::VectorXcd& u0, const Eigen::VectorXcd& f, double omega0, double t,
                       long long n) const {
    const double h = t / static_cast<double>(n);
    const double tau = 0.5 * h;
    const Eigen::VectorXcd E = (-kI * tau * lambda_.array()).exp();
    Eigen::VectorXcd Phi(lambda_.size());
    for (Eigen::Index i = 0; i < Phi.size(); ++i) Phi[i] = tau * expm1_rel(-kI * tau * (lambda_[i] - omega0));
    const bool forced = f.squaredNorm() > 0.0;
    auto half = [&](Eigen::VectorXcd& u, double t_end) {
      u = E.cwiseProduct(u);
      if (forced) u -= kI * std::exp(-kI * omega0 * t_end) * Phi.cwiseProduct(f);
    };
    Eigen::VectorXcd u = u0;
    for (long long k = 0; k < n; ++k) {
      const double t0 = h * static_cast<double>(k);
      half(u, t0 + tau);
      u = off_diagonal_exp(u, h);
      half(u, t0 + h);
    }
    return u;
  }

  /// Richardson-extrapolated Strang runs, doubling the step count until
  /// successive extrapolations agree.
  Eigen::VectorXcd solve(const Eigen::VectorXcd& u0, const Eigen::VectorXcd& f, double omega0, double t,
                         const PropagateOptions& opts) const {
    long long n = std::max<long long>(1, static_cast<long long>(std::ceil(t / opts.initial_step)));
    Eigen::VectorXcd coarse = run(u0, f, omega0, t, n);
    Eigen::VectorXcd previous;
    for (int k = 0; k < opts.max_doublings; ++k) {
      n *= 2;
      const Eigen::VectorXcd fine = run(u0, f, omega0, t, n);
      const Eigen::VectorXcd extrap = (4.0 * fine - coarse) / 3.0;
      if (previous.size() > 0 && relative_difference(extrap, previous) < opts.split_tol) return extrap;
      previous = extrap;
      coarse = fine;
    }
    throw IterationStalled("splitting did not reach the requested accuracy");
  }

 private:
  Eigen::VectorXcd off_diagonal_exp(const Eigen::VectorXcd& v, double h) const {
    Eigen::VectorXcd sum = v, term = v;
    for (int k = 1; k <= 80; ++k) {
      term = (-kI * h / static_cast<double>(k)) * (P_.apply(term) - diag_.cwiseProduct(term));
      sum += term;
      if (term.norm() <= 1e-17 * sum.norm()) break;
    }
    return sum;
  }

  TruncatedOperator P_;
  Eigen::VectorXcd lambda_;
  Eigen::VectorXcd diag_;
};

bool eigenbasis_available(const TruncatedOperator& P, std::size_t budget) {
  return P.kind() == OperatorKind::Diagonal || (P.kind() == OperatorKind::Dense && P.max_block_dim() <= budget);
}

std::function<cplx(cplx)> duhamel_coefficient(double omega0, double t) {
  const cplx phase = std::exp(-kI * omega0 * t);
  return [=](cplx lambda) { return -kI * t * phase * expm1_rel(-kI * t * (lambda - omega0)); };
}

}  // namespace

SpectralField propagate(const TruncatedOperator& P, const TruncatedOperator& Q, double nu, const SpectralField& f,
                        double omega0, double t, const PropagateOptions& opts) {
  if (t < 0.0) throw std::invalid_argument("propagate requires t >= 0");
  if (nu < 0.0) throw std::invalid_argument("propagate requires nu >= 0");
  if (f.N != P.N()) throw std::invalid_argument("field truncation does not match operator");
  if (t == 0.0) return SpectralField::zeros(f.N);
  const bool have_eigen = eigenbasis_available(P, opts.dense_budget);
  Backend backend = opts.backend;
  if (backend == Backend::Auto) backend = have_eigen ? Backend::Eigenbasis : Backend::Splitting;

  auto by_eigen = [&]() {
    const ViscousEigenbasis eb(P, Q, nu, opts.dense_budget);
    return eb.apply(duhamel_coefficient(omega0, t), f.coeffs);
  };
  auto by_split = [&]() {
    const SplittingPropagator sp(P, Q, nu);
    return sp.solve(Eigen::VectorXcd::Zero(f.coeffs.size()), f.coeffs, omega0, t, opts);
  };

  Eigen::VectorXcd u = backend == Backend::Eigenbasis ? by_eigen() : by_split();
  if (opts.cross_check && have_eigen) {
    const Eigen::VectorXcd other = backend == Backend::Eigenbasis ? by_split() : by_eigen();
    const double diff = relative_difference(u, other);
    if (diff > opts.cross_tol) {
      std::ostringstream msg;
      msg << "eigenbasis and splitting differ by " << diff;
      throw BackendDisagreement(msg.str());
    }
  }
  return SpectralField(f.N, std::move(u));
}

SpectralField semigroup(const TruncatedOperator& P, const TruncatedOperator& Q, double nu, double t,
                        const SpectralField& v, const PropagateOptions& opts) {
  if (t < 0.0) throw std::invalid_argument("semigroup requires t >= 0");
  if (t == 0.0) return v;
  Backend backend = opts.backend;
  if (backend == Backend::Auto)
    backend = eigenbasis_available(P, opts.dense_budget) ? Backend::Eigenbasis : Backend::Splitting;
  if (backend == Backend::Eigenbasis) {
    const ViscousEigenbasis eb(P, Q, nu, opts.dense_budget);
    return SpectralField(v.N, eb.apply([t](cplx l) { return std::exp(-kI * l * t); }, v.coeffs));
  }
  const SplittingPropagator sp(P, Q, nu);
  return SpectralField(v.N, sp.solve(v.coeffs, Eigen::VectorXcd::Zero(v.coeffs.size()), 0.0, t, opts));
}

// ---------------------------------------------------------------------------
// Contour quadrature

namespace {

constexpr int kTransitionPanels = 8;

/// Composite Gauss-Legendre rule along the real axis from `from` to `to`,
/// weights signed by the direction of travel. Panel edges sit on the cutoff
/// transition points and the transition bands get extra panels.
std::vector<std::pair<double, double>> segment_rule(double from, double to, double width, double delta,
                                                    double inner_fraction, int n_quad) {
  const QuadratureRule& gl = gauss_legendre(n_quad);
  const double lo = std::min(from, to), hi = std::max(from, to);
  std::vector<double> edges{lo, hi};
  for (double e : {-delta, -inner_fraction * delta, inner_fraction * delta, delta})
    if (e > lo && e < hi) edges.push_back(e);
  std::sort(edges.begin(), edges.end());
  if (from > to) std::reverse(edges.begin(), edges.end());
  const double band_width = (1.0 - inner_fraction) * delta / kTransitionPanels;
  std::vector<std::pair<double, double>> out;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double u = edges[k], v = edges[k + 1];
    const double mid = std::abs(0.5 * (u + v));
    const bool band = mid > inner_fraction * delta && mid < delta;
    const double cap = band ? std::min(width, band_width) : width;
    const auto panels = static_cast<int>(std::ceil(std::abs(v - u) / cap - 1e-12));
    const double L = (v - u) / panels;
    for (int p = 0; p < panels; ++p) {
      const double c = u + (p + 0.5) * L;
      for (int j = static_cast<int>(gl.nodes.size()) - 1; j >= 0; --j)
        out.emplace_back(c + 0.5 * L * gl.nodes[j], 0.5 * L * gl.weights[j]);
    }
  }
  return out;
}

}  // namespace

double contour_tail_estimate(const ContourParams& params, double r_max, double t) {
  const double sb = std::sin(params.beta);
  return std::exp(-r_max * sb * t) / (kPi * params.delta * t * sb);
}

std::vector<ContourNode> build_contour(double norm_P, double nu, double t_min, double t_max,
                                       const ContourParams& params) {
  if (!(nu > 0.0)) throw std::invalid_argument("contour representation requires nu > 0");
  if (!(t_min > 0.0) || t_max < t_min) throw std::invalid_argument("contour needs 0 < t_min <= t_max");
  if (!(params.beta > 0.0 && params.beta < 0.5 * kPi)) throw std::invalid_argument("beta must lie in (0, pi/2)");
  const QuadratureRule& gl = gauss_legendre(params.n_quad);
  const double a = norm_P + params.delta;
  const double sb = std::sin(params.beta);
  const double r_max = params.r_max > 0.0 ? params.r_max : 16.0 * std::log(10.0) / (t_min * sb);
  if (contour_tail_estimate(params, r_max, t_min) > params.tail_tol) {
    std::ostringstream msg;
    msg << "ray tail estimate " << contour_tail_estimate(params, r_max, t_min) << " exceeds " << params.tail_tol
        << " at r_max = " << r_max;
    throw ContourTooShort(msg.str());
  }
  std::vector<ContourNode> nodes;

  // Rays, panels graded with the distance to the numerical range.
  std::vector<double> edges{0.0};
  while (edges.back() < r_max) {
    const double r = edges.back();
    const double w = std::min(0.5 * (params.delta + r * sb), 4.0 / t_max);
    edges.push_back(std::min(r_max, r + w));
  }
  const cplx down_right = std::exp(-kI * params.beta);
  const cplx up_right = std::exp(kI * params.beta);
  // Gamma_+ runs inward: z = a + r e^{-i beta}, r from r_max to 0.
  for (std::size_t p = edges.size() - 1; p-- > 0;) {
    const double mid = 0.5 * (edges[p] + edges[p + 1]), half = 0.5 * (edges[p + 1] - edges[p]);
    for (int j = gl.nodes.size() - 1; j >= 0; --j) {
      const double r = mid + half * gl.nodes[j];
      nodes.push_back({a + r * down_right, -down_right * (half * gl.weights[j]), ContourNode::RayPlus});
    }
  }
  // Gamma_0 from a to -a.
  for (const auto& [lambda, w] :
       segment_rule(a, -a, std::min({0.25, 2.0 * nu, 10.0 / t_max}), params.delta, params.inner_fraction, params.n_quad))
    nodes.push_back({lambda, w, ContourNode::Segment});
  // Gamma_- runs outward: z = -a - r e^{i beta}.
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const double mid = 0.5 * (edges[p] + edges[p + 1]), half = 0.5 * (edges[p + 1] - edges[p]);
    for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
      const double r = mid + half * gl.nodes[j];
      nodes.push_back({-a - r * up_right, -up_right * (half * gl.weights[j]), ContourNode::RayMinus});
    }
  }
  return nodes;
}

namespace {

/// Ordered sum of per-node terms so results do not depend on the job count.
Eigen::VectorXcd ordered_sum(std::size_t n, Eigen::Index dim, unsigned jobs,
                             const std::function<Eigen::VectorXcd(std::size_t)>& term) {
  std::vector<Eigen::VectorXcd> parts(n);
  parallel_for(n, jobs, [&](std::size_t j) { parts[j] = term(j); });
  Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(dim);
  for (const auto& p : parts)
    if (p.size() > 0) sum += p;
  return sum;
}

}  // namespace

SpectralField semigroup_contour(const TruncatedOperator& P, const TruncatedOperator& Q, double nu, double t,
                                const SpectralField& f, const ContourParams& params) {
  if (!(t > 0.0)) throw std::invalid_argument("semigroup_contour requires t > 0");
  const double norm_P = operator_norm(P, 0.0, 0.0);
  const auto nodes = build_contour(norm_P, nu, t, t, params);
  const ResolventSolver solver(P, Q, nu);
  const Eigen::VectorXcd sum = ordered_sum(nodes.size(), f.coeffs.size(), params.jobs, [&](std::size_t j) {
    const auto& nd = nodes[j];
    return Eigen::VectorXcd(nd.weight * std::exp(-kI * nd.z * t) * solver.solve(nd.z, f.coeffs));
  });
  return SpectralField(f.N, -sum / (2.0 * kPi * kI));
}

// ---------------------------------------------------------------------------
// Three-term decomposition

namespace {

/// Resolvent values G(lambda) = (P_nu - lambda)^{-1} g on the symmetric
/// nodes of the chi-window, used by the direct e quadrature.
struct WindowSamples {
  std::vector<std::pair<double, double>> rule;
  std::vector<Eigen::VectorXcd> plus, minus;
  Eigen::VectorXcd at_zero;
};

WindowSamples sample_window(const ResolventSolver& solver, const Eigen::VectorXcd& g, double delta,
                            double inner_fraction, double nu, double t_max, int n_quad, unsigned jobs) {
  WindowSamples ws;
  ws.rule = segment_rule(0.0, delta, std::min({0.25, 2.0 * nu, 10.0 / t_max}), delta, inner_fraction, n_quad);
  ws.plus.resize(ws.rule.size());
  ws.minus.resize(ws.rule.size());
  parallel_for(ws.rule.size(), jobs, [&](std::size_t j) {
    ws.plus[j] = solver.solve(ws.rule[j].first, g);
    ws.minus[j] = solver.solve(-ws.rule[j].first, g);
  });
  ws.at_zero = solver.solve(0.0, g);
  return ws;
}

/// e(t) = (2 pi i)^{-1} [PV int h(l)/l dl + i pi h(0)], h = chi G e^{-i l t}.
Eigen::VectorXcd window_integral(const WindowSamples& ws, double t, double delta, double inner_fraction) {
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(ws.at_zero.size());
  for (std::size_t j = 0; j < ws.rule.size(); ++j) {
    const double l = ws.rule[j].first, w = ws.rule[j].second;
    const double c = cutoff_profile(l, delta, inner_fraction);
    if (c == 0.0) continue;
    acc += (w * c / l) * (std::exp(-kI * l * t) * ws.plus[j] - std::exp(kI * l * t) * ws.minus[j]);
  }
  acc += kI * kPi * ws.at_zero;
  return acc / (2.0 * kPi * kI);
}

std::map<std::string, double> part_norms(const std::map<std::string, const SpectralField*>& parts) {
  std::map<std::string, double> out;
  for (const auto& [name, field] : parts) {
    out[name + ".L2"] = sobolev_norm(*field, 0.0);
    out[name + ".H1"] = sobolev_norm(*field, 1.0);
    out[name + ".H-0.6"] = sobolev_norm(*field, -0.6);
  }
  return out;
}

}  // namespace

DecompositionResult decompose(const TruncatedOperator& P, const TruncatedOperator& Q, double nu, double t,
                              const SpectralField& f, double delta, double inner_fraction,
                              const DecompositionOptions& opts) {
  if (!(nu > 0.0)) throw std::invalid_argument("decompose requires nu > 0");
  if (!(t > 0.0)) throw std::invalid_argument("decompose requires t > 0");
  const SpectralCutoffs cut = spectral_cutoff(P, delta, inner_fraction, opts.dense_budget);
  const Eigen::VectorXcd g = cut.phi.apply(f.coeffs);
  const ViscousEigenbasis eb(P, Q, nu, opts.dense_budget);
  const ResolventSolver solver(P, Q, nu);
  const int N = f.N;

  DecompositionResult res;
  res.t = t;
  res.nu = nu;
  PropagateOptions popts;
  popts.dense_budget = opts.dense_budget;
  res.u_nu_t = propagate(P, Q, nu, f, 0.0, t, popts);
  res.u_inf = SpectralField(N, -solve_resolvent(P, Q, 0.0, nu, f).coeffs);
  const Eigen::VectorXcd total = eb.apply([t](cplx l) { return std::exp(-kI * l * t) / l; }, f.coeffs);

  const bool need_b = opts.path == DecompositionPath::Subtraction || opts.cross_check;
  const bool need_e = opts.path == DecompositionPath::DirectQuadrature || opts.cross_check;
  Eigen::VectorXcd b_quad, e_quad;
  if (need_b) {
    const double norm_P = operator_norm(P, 0.0, 0.0);
    ContourParams cp = opts.contour;
    cp.delta = delta;
    cp.inner_fraction = inner_fraction;
    const auto nodes = build_contour(norm_P, nu, t, t, cp);
    const Eigen::VectorXcd integral = ordered_sum(nodes.size(), g.size(), opts.contour.jobs, [&](std::size_t j) {
      const auto& nd = nodes[j];
      double weight = 1.0;
      if (nd.part == ContourNode::Segment) weight = 1.0 - cutoff_profile(nd.z.real(), delta, inner_fraction);
      if (weight == 0.0) return Eigen::VectorXcd();
      return Eigen::VectorXcd((weight * nd.weight * std::exp(-kI * nd.z * t) / nd.z) * solver.solve(nd.z, g));
    });
    b_quad = eb.apply([t](cplx l) { return std::exp(-kI * l * t) / l; }, f.coeffs - g) - integral / (2.0 * kPi * kI);
  }
  if (need_e) {
    const WindowSamples ws = sample_window(solver, g, delta, inner_fraction, nu, t, opts.contour.n_quad, opts.contour.jobs);
    e_quad = window_integral(ws, t, delta, inner_fraction);
  }
  if (opts.path == DecompositionPath::Subtraction) {
    res.b = SpectralField(N, b_quad);
    res.e = SpectralField(N, total - b_quad);
  } else {
    res.e = SpectralField(N, e_quad);
    res.b = SpectralField(N, total - e_quad);
  }
  if (need_b && need_e) {
    const double mag = std::max({total.norm(), b_quad.norm(), e_quad.norm(), 1e-300});
    res.quadrature_defect = (b_quad + e_quad - total).norm() / mag;
    const Eigen::VectorXcd other = opts.path == DecompositionPath::Subtraction ? e_quad : Eigen::VectorXcd(total - b_quad);
    const double scale = std::max(res.e.coeffs.norm(), 1e-300);
    res.path_difference = (res.e.coeffs - other).norm() / scale;
  }
  const Eigen::VectorXcd sum = res.u_inf.coeffs + res.b.coeffs + res.e.coeffs;
  res.identity_error = (res.u_nu_t.coeffs - sum).norm() / std::max(res.u_nu_t.coeffs.norm(), 1e-300);
  res.norms = part_norms({{"u", &res.u_nu_t}, {"u_inf", &res.u_inf}, {"b", &res.b}, {"e", &res.e}});
  return res;
}

// ---------------------------------------------------------------------------
// Timescale scan

TruncatedOperator shift_operator(const TruncatedOperator& P, double omega) {
  TruncatedOperator out;
  switch (P.kind()) {
    case OperatorKind::Diagonal:
      out = TruncatedOperator::make_diagonal(P.N(), P.diagonal().array() - omega, P.hermitian());
      break;
    case OperatorKind::Dense: {
      std::vector<DenseBlock> blocks = P.blocks();
      for (auto& b : blocks) b.matrix.diagonal().array() -= omega;
      out = TruncatedOperator::make_dense(P.N(), std::move(blocks), P.hermitian());
      break;
    }
    case OperatorKind::MatrixFree: {
      auto fwd = [P, omega](const Eigen::VectorXcd& v) { return Eigen::VectorXcd(P.apply(v) - omega * v); };
      auto adj = [P, omega](const Eigen::VectorXcd& v) { return Eigen::VectorXcd(P.apply_adjoint(v) - omega * v); };
      out = TruncatedOperator::make_matrix_free(P.N(), fwd, adj, P.diagonal().array() - omega, P.hermitian());
      break;
    }
  }
  out.info = P.info;
  return out;
}

std::vector<double> log_grid(double lo, double hi, int points_per_decade) {
  if (!(lo > 0.0) || hi < lo) throw std::invalid_argument("log grid needs 0 < lo <= hi");
  std::vector<double> out{lo};
  const double step = std::pow(10.0, 1.0 / points_per_decade);
  const auto k0 = static_cast<long>(std::floor(points_per_decade * std::log10(lo))) + 1;
  for (long k = k0;; ++k) {
    const double v = std::pow(10.0, static_cast<double>(k) / points_per_decade);
    if (v >= hi * (1.0 - 1e-12)) break;
    if (v > lo * (1.0 + 1e-12)) out.push_back(v);
  }
  (void)step;
  if (hi > lo) out.push_back(hi);
  return out;
}

TimescaleResult timescale_scan(const TruncatedOperator& P, const TruncatedOperator& Q, const SpectralField& f,
                               double delta1, const std::vector<double>& nu_grid, double s,
                               const TimescaleOptions& opts) {
  if (nu_grid.empty()) throw std::invalid_argument("nu grid must be non-empty");
  TimescaleResult result;
  result.delta1 = delta1;
  result.s = s;
  if (!opts.hypothesis_verified) result.flags.push_back("hypothesis-unverified");
  const TruncatedOperator Pw = shift_operator(P, opts.omega0);
  const SpectralCutoffs cut = spectral_cutoff(Pw, opts.delta, opts.inner_fraction, opts.dense_budget);
  const Eigen::VectorXcd g = cut.phi.apply(f.coeffs);
  const double f1 = sobolev_norm(f, 1.0);
  const int N = f.N;

  double T_max = opts.T_max;
  if (opts.convergence_window && T_max <= 0.0) {
    if (opts.max_spatial_gradient > 0.0) T_max = N / (2.0 * opts.max_spatial_gradient);
    else result.flags.push_back("no-truncation-horizon");
  }
  result.T_max = T_max;

  // Unitary reference and stationary profile, both for the filtered forcing.
  const ViscousEigenbasis unitary(Pw, Q, 0.0, opts.dense_budget);
  SpectralField stationary;
  bool have_stationary = false;
  if (opts.convergence_window && opts.stationary_reference) {
    std::vector<double> nus = opts.stationary_nus;
    if (nus.empty())
      for (int k = 0; k < 6; ++k) nus.push_back(1e-2 * std::pow(0.5, k));
    LimitingOptions lopt;
    lopt.s = s;
    lopt.require_cauchy = false;
    lopt.dense_budget = opts.dense_budget;
    try {
      const LimitingResult lim = limiting_resolvent(Pw, 0.0, SpectralField(N, g), nus, lopt);
      stationary = SpectralField(N, -lim.field.coeffs);
      result.stationary_cauchy = lim.cauchy;
      have_stationary = true;
      if (!lim.cauchy) result.flags.push_back("stationary-not-cauchy");
    } catch (const NearEigenvalue&) {
      result.flags.push_back("stationary-near-eigenvalue");
    }
  }

  std::vector<std::vector<TimescaleRecord>> per_nu(nu_grid.size());
  std::vector<double> e_star(nu_grid.size()), t_star(nu_grid.size()), b_max(nu_grid.size());
  std::vector<double> sup_ref(nu_grid.size(), 0.0), sup_stat(nu_grid.size(), 0.0);
  parallel_for(nu_grid.size(), opts.jobs, [&](std::size_t in) {
    const double nu = nu_grid[in];
    const ResolventSolver solver(Pw, Q, nu);
    const ViscousEigenbasis eb(Pw, Q, nu, opts.dense_budget);
    const double ts = std::pow(nu, -1.0 / 3.0 - delta1);
    t_star[in] = ts;
    std::vector<double> grid;
    const int lo = static_cast<int>(std::floor(opts.points_per_decade * std::log10(opts.window_lo)));
    const int hi = static_cast<int>(std::ceil(opts.points_per_decade * std::log10(opts.window_hi)));
    for (int k = lo; k <= hi; ++k) grid.push_back(ts * std::pow(10.0, static_cast<double>(k) / opts.points_per_decade));
    const WindowSamples ws =
        sample_window(solver, g, opts.delta, opts.inner_fraction, nu, grid.back(), opts.contour.n_quad, 1);
    for (double t : grid) {
      const Eigen::VectorXcd e = window_integral(ws, t, opts.delta, opts.inner_fraction);
      const Eigen::VectorXcd total = eb.apply([t](cplx l) { return std::exp(-kI * l * t) / l; }, f.coeffs);
      const Eigen::VectorXcd b = total - e;
      TimescaleRecord r;
      r.symbol = P.info.symbol;
      r.N = N;
      r.nu = nu;
      r.t = t;
      r.norm_e_s = sobolev_norm(e, N, s);
      r.norm_b_L2 = b.norm();
      r.window_flag = "decay";
      b_max[in] = std::max(b_max[in], r.norm_b_L2 / f1);
      if (std::abs(t / ts - 1.0) < 1e-12) e_star[in] = r.norm_e_s;
      per_nu[in].push_back(r);
    }
    const double t_open = std::pow(nu, -1.0 / 3.0 - opts.alpha);
    if (opts.convergence_window && T_max > t_open) {
      for (double t : log_grid(t_open, T_max, opts.points_per_decade)) {
        const auto coef = duhamel_coefficient(0.0, t);
        const Eigen::VectorXcd u = eb.apply(coef, g);
        const Eigen::VectorXcd u0 = unitary.apply(coef, g);
        TimescaleRecord r;
        r.symbol = P.info.symbol;
        r.N = N;
        r.nu = nu;
        r.t = t;
        r.norm_u_minus_ref_s = sobolev_norm(u - u0, N, s);
        sup_ref[in] = std::max(sup_ref[in], r.norm_u_minus_ref_s);
        if (have_stationary) {
          r.norm_u_minus_stationary_s = sobolev_norm(u - stationary.coeffs, N, s);
          sup_stat[in] = std::max(sup_stat[in], r.norm_u_minus_stationary_s);
        }
        r.window_flag = "convergence";
        per_nu[in].push_back(r);
      }
    }
  });

  std::vector<double> xs, ys;
  for (std::size_t in = 0; in < nu_grid.size(); ++in) {
    result.records.insert(result.records.end(), per_nu[in].begin(), per_nu[in].end());
    result.e_at_tstar.emplace_back(nu_grid[in], e_star[in]);
    result.max_b_over_f1 = std::max(result.max_b_over_f1, b_max[in]);
    if (opts.convergence_window && T_max > std::pow(nu_grid[in], -1.0 / 3.0 - opts.alpha)) {
      result.sup_discrepancy.emplace_back(nu_grid[in], sup_ref[in]);
      if (have_stationary) result.sup_stationary.emplace_back(nu_grid[in], sup_stat[in]);
    }
    if (e_star[in] > 0.0) {
      xs.push_back(std::log(t_star[in]));
      ys.push_back(std::log(e_star[in]));
    }
  }
  result.delta2_tstar = -fit_slope(xs, ys);

  // Within-nu regression: each nu contributes its own centred (log t, log e).
  double sxy = 0.0, sxx = 0.0;
  for (const auto& recs : per_nu) {
    std::vector<double> lx, ly;
    for (const auto& r : recs)
      if (r.window_flag == "decay" && r.norm_e_s > 0.0) {
        lx.push_back(std::log(r.t));
        ly.push_back(std::log(r.norm_e_s));
      }
    if (lx.size() < 2) continue;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      mx += lx[i];
      my += ly[i];
    }
    mx /= lx.size();
    my /= ly.size();
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
  }
  if (sxx > 0.0) result.delta2 = -sxy / sxx;
  return result;
}

void write_timescale_csv(const TimescaleResult& result, std::ostream& os) {
  os << "symbol,N,nu,t,norm_e_s,norm_b_L2,norm_u_minus_ref_s,window_flag,norm_u_minus_stationary_s\n";
  os.precision(17);
  for (const auto& r : result.records)
    os << r.symbol << ',' << r.N << ',' << r.nu << ',' << r.t << ',' << r.norm_e_s << ',' << r.norm_b_L2 << ','
       << r.norm_u_minus_ref_s << ',' << r.window_flag << ',' << r.norm_u_minus_stationary_s << '\n';
}

ContractionReport contraction_check(const TruncatedOperator& P, const TruncatedOperator& Q, double nu,
                                    const SpectralField& f, const std::vector<double>& t_grid, double slack) {
  ContractionReport rep;
  const double fn = f.l2_norm();
  std::unique_ptr<ViscousEigenbasis> eb;
  if (eigenbasis_available(P, kDenseBudget)) eb = std::make_unique<ViscousEigenbasis>(P, Q, nu);
  for (double t : t_grid) {
    if (t < 0.0) throw std::invalid_argument("contraction times must be non-negative");
    const double norm = t == 0.0 ? fn
                        : eb ? eb->apply([t](cplx l) { return std::exp(-kI * l * t); }, f.coeffs).norm()
                             : semigroup(P, Q, nu, t, f).l2_norm();
    const double bound = std::exp(-t * nu) * fn;
    rep.times.push_back(t);
    rep.norms.push_back(norm);
    rep.bounds.push_back(bound);
    if (bound > 0.0) rep.max_ratio = std::max(rep.max_ratio, norm / bound);
    rep.holds = rep.holds && norm <= bound * (1.0 + slack);
  }
  return rep;
}

}  // namespace iwave
