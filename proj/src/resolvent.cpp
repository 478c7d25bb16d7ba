#include "iwave/resolvent.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "iwave/errors.hpp"
#include "iwave/parallel.hpp"

namespace iwave {

namespace {

const Eigen::VectorXcd& q_diagonal(const TruncatedOperator& Q) {
  if (Q.kind() != OperatorKind::Diagonal) throw std::invalid_argument("viscosity operator must be diagonal");
  return Q.diagonal();
}

void require_same_truncation(const TruncatedOperator& P, const TruncatedOperator& Q) {
  if (P.N() != Q.N()) throw std::invalid_argument("P and Q have different truncations");
}

Eigen::VectorXcd gather(const Eigen::VectorXcd& v, const std::vector<int>& idx) {
  Eigen::VectorXcd out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

void scatter(Eigen::VectorXcd& dst, const std::vector<int>& idx, const Eigen::VectorXcd& src) {
  for (std::size_t i = 0; i < idx.size(); ++i) dst[idx[i]] = src[i];
}

Eigen::MatrixXcd viscous_block(const DenseBlock& b, const Eigen::VectorXcd& q, double nu, cplx z) {
  Eigen::MatrixXcd M = b.matrix;
  for (std::size_t i = 0; i < b.modes.size(); ++i) M(i, i) -= z + cplx(0.0, nu) * q[b.modes[i]];
  return M;
}

Eigen::VectorXcd gmres_solve(const TruncatedOperator& P, const Eigen::VectorXcd& q, double nu, cplx z,
                             const Eigen::VectorXcd& b, const SolverOptions& opts, bool adjoint) {
  const cplx zz = adjoint ? std::conj(z) : z;
  const double sign = adjoint ? -1.0 : 1.0;
  Eigen::VectorXcd pre = P.diagonal();
  for (Eigen::Index i = 0; i < pre.size(); ++i) pre[i] = 1.0 / (pre[i] - zz - cplx(0.0, sign * nu) * q[i]);
  auto A = [&](const Eigen::VectorXcd& v) -> Eigen::VectorXcd {
    Eigen::VectorXcd w = adjoint ? P.apply_adjoint(v) : P.apply(v);
    return w - zz * v - cplx(0.0, sign * nu) * q.cwiseProduct(v);
  };
  auto M = [&](const Eigen::VectorXcd& v) -> Eigen::VectorXcd { return pre.cwiseProduct(v); };
  GmresResult r = gmres(A, M, b, opts.tol, opts.restart, opts.max_iter);
  if (!r.converged && r.relative_residual > 1e-10) {
    std::ostringstream msg;
    msg << "GMRES stalled at relative residual " << r.relative_residual << " after " << r.iterations
        << " iterations (z = " << z << ", nu = " << nu << ")";
    throw IterationStalled(msg.str());
  }
  return r.x;
}

}  // namespace

Eigen::VectorXcd viscous_apply(const TruncatedOperator& P, const TruncatedOperator& Q, double nu, cplx z,
                               const Eigen::VectorXcd& v) {
  require_same_truncation(P, Q);
  return P.apply(v) - z * v - cplx(0.0, nu) * q_diagonal(Q).cwiseProduct(v);
}

ResolventSolver::ResolventSolver(const TruncatedOperator& P, const TruncatedOperator& Q, double nu,
                                 SolverOptions opts)
    : P_(P), Q_(Q), nu_(nu), opts_(opts) {
  require_same_truncation(P, Q);
  const auto& q = q_diagonal(Q);
  if (P.kind() == OperatorKind::Dense) {
    if (P.max_block_dim() > opts.dense_budget) throw TooLargeForDense("block exceeds dense budget");
    for (const auto& b : P.blocks())
      blocks_.push_back({b.modes, std::make_unique<ShiftedSolver>(viscous_block(b, q, nu, 0.0))});
  }
}

Eigen::VectorXcd ResolventSolver::solve(cplx z, const Eigen::VectorXcd& b) const {
  const auto& q = Q_.diagonal();
  switch (P_.kind()) {
    case OperatorKind::Diagonal: {
      Eigen::VectorXcd out(b.size());
      for (Eigen::Index i = 0; i < b.size(); ++i) out[i] = b[i] / (P_.diagonal()[i] - z - cplx(0.0, nu_) * q[i]);
      return out;
    }
    case OperatorKind::Dense: {
      Eigen::VectorXcd out(b.size());
      for (const auto& blk : blocks_) scatter(out, blk.modes, blk.solver->solve(z, gather(b, blk.modes)));
      return out;
    }
    case OperatorKind::MatrixFree: return gmres_solve(P_, q, nu_, z, b, opts_, false);
  }
  return {};
}

SpectralField solve_resolvent(const TruncatedOperator& P, const TruncatedOperator& Q, double omega, double nu,
                              const SpectralField& f, const SolverOptions& opts) {
  if (!(nu > 0.0)) throw std::invalid_argument("solve_resolvent requires nu > 0");
  require_same_truncation(P, Q);
  if (f.N != P.N()) throw std::invalid_argument("field truncation does not match operator");
  const auto& q = q_diagonal(Q);
  Eigen::VectorXcd u;
  if (P.kind() == OperatorKind::MatrixFree) {
    u = gmres_solve(P, q, nu, omega, f.coeffs, opts, false);
  } else if (P.kind() == OperatorKind::Diagonal) {
    u = f.coeffs.array() / (P.diagonal().array() - omega - cplx(0.0, nu) * q.array());
  } else {
    if (P.max_block_dim() > opts.dense_budget) throw TooLargeForDense("block exceeds dense budget");
    u.resize(f.coeffs.size());
    for (const auto& b : P.blocks())
      scatter(u, b.modes, viscous_block(b, q, nu, omega).partialPivLu().solve(gather(f.coeffs, b.modes)));
  }
  const double fn = f.coeffs.norm();
  if (fn > 0.0) {
    const double res = (viscous_apply(P, Q, nu, omega, u) - f.coeffs).norm() / fn;
    if (res > 1e-10) {
      std::ostringstream msg;
      msg << "resolvent residual " << res << " exceeds 1e-10";
      throw IterationStalled(msg.str());
    }
  }
  return SpectralField(f.N, std::move(u));
}

TruncatedOperator resolvent_operator(const TruncatedOperator& P, const TruncatedOperator& Q, cplx z, double nu,
                                     const SolverOptions& opts) {
  require_same_truncation(P, Q);
  const auto& q = q_diagonal(Q);
  switch (P.kind()) {
    case OperatorKind::Diagonal: {
      Eigen::VectorXcd d = (P.diagonal().array() - z - cplx(0.0, nu) * q.array()).inverse();
      return TruncatedOperator::make_diagonal(P.N(), std::move(d), false);
    }
    case OperatorKind::Dense: {
      if (P.max_block_dim() > opts.dense_budget) throw TooLargeForDense("block exceeds dense budget");
      std::vector<DenseBlock> inv;
      inv.reserve(P.blocks().size());
      for (const auto& b : P.blocks()) inv.push_back({b.modes, viscous_block(b, q, nu, z).partialPivLu().inverse()});
      return TruncatedOperator::make_dense(P.N(), std::move(inv), false);
    }
    case OperatorKind::MatrixFree: {
      auto fwd = [P, q, nu, z, opts](const Eigen::VectorXcd& v) { return gmres_solve(P, q, nu, z, v, opts, false); };
      auto adj = [P, q, nu, z, opts](const Eigen::VectorXcd& v) { return gmres_solve(P, q, nu, z, v, opts, true); };
      Eigen::VectorXcd d = (P.diagonal().array() - z - cplx(0.0, nu) * q.array()).inverse();
      return TruncatedOperator::make_matrix_free(P.N(), fwd, adj, std::move(d), false);
    }
  }
  return {};
}

double operator_norm(const TruncatedOperator& A, double a, double b, double tol) {
  const ModeSet ms(A.N());
  const Eigen::VectorXd left = ms.q_power(b / 2.0);
  const Eigen::VectorXd right = ms.q_power(-a / 2.0);
  switch (A.kind()) {
    case OperatorKind::Diagonal:
      return (left.array() * A.diagonal().array().abs() * right.array()).maxCoeff();
    case OperatorKind::Dense: {
      double best = 0.0;
      for (const auto& blk : A.blocks()) {
        Eigen::MatrixXcd W = blk.matrix;
        for (std::size_t i = 0; i < blk.modes.size(); ++i) {
          W.row(i) *= left[blk.modes[i]];
          W.col(i) *= right[blk.modes[i]];
        }
        const double s = W.rows() > 64 ? Eigen::BDCSVD<Eigen::MatrixXcd>(W).singularValues()[0]
                                       : Eigen::JacobiSVD<Eigen::MatrixXcd>(W).singularValues()[0];
        best = std::max(best, s);
      }
      return best;
    }
    case OperatorKind::MatrixFree: {
      auto B = [&](const Eigen::VectorXcd& v) -> Eigen::VectorXcd {
        return left.cast<cplx>().cwiseProduct(A.apply(right.cast<cplx>().cwiseProduct(v)));
      };
      auto Bt = [&](const Eigen::VectorXcd& v) -> Eigen::VectorXcd {
        return right.cast<cplx>().cwiseProduct(A.apply_adjoint(left.cast<cplx>().cwiseProduct(v)));
      };
      const NormEstimate est = largest_singular_value(B, Bt, static_cast<Eigen::Index>(ms.size()), tol);
      if (!est.converged)
        throw IterationStalled("Lanczos norm estimate did not converge in " + std::to_string(est.iterations) +
                               " steps");
      return est.value;
    }
  }
  return 0.0;
}

La1Report check_la1(const TruncatedOperator& P, const TruncatedOperator& Q, double omega, double nu,
                    const SolverOptions& opts) {
  if (!(nu > 0.0)) throw std::invalid_argument("check_la1 requires nu > 0");
  const TruncatedOperator R = resolvent_operator(P, Q, omega, nu, opts);
  La1Report rep;
  rep.measured = operator_norm(R, -1.0, 1.0);
  rep.bound = 1.0 / nu;
  const ModeSet ms(P.N());
  const Eigen::VectorXd qh = ms.q_power(0.5);
  const auto& q = q_diagonal(Q);
  if (P.kind() == OperatorKind::MatrixFree) {
    // Residual form: (Q^{-1/2}(P - omega)Q^{-1/2} - i nu) Q^{1/2} R Q^{1/2} x = x.
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 3; ++trial) {
      Eigen::VectorXcd x(ms.size());
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = cplx(g(rng), g(rng));
      const Eigen::VectorXcd y = qh.cast<cplx>().cwiseProduct(R.apply(qh.cast<cplx>().cwiseProduct(x)));
      const Eigen::VectorXcd back =
          qh.cwiseInverse().cast<cplx>().cwiseProduct(P.apply(qh.cwiseInverse().cast<cplx>().cwiseProduct(y))) -
          omega * qh.cwiseAbs2().cwiseInverse().cast<cplx>().cwiseProduct(y) - cplx(0.0, nu) * y;
      rep.identity_error = std::max(rep.identity_error, (back - x).norm() / x.norm());
    }
    return rep;
  }
  double worst = 0.0, scale = 0.0;
  const std::vector<DenseBlock> none;
  for (const auto& blk : P.kind() == OperatorKind::Dense ? P.blocks() : none) {
    const auto n = static_cast<Eigen::Index>(blk.modes.size());
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = std::sqrt(q[blk.modes[i]].real());
    Eigen::MatrixXcd lhs = viscous_block(blk, q, nu, omega).partialPivLu().inverse();
    lhs = w.cast<cplx>().asDiagonal() * lhs * w.cast<cplx>().asDiagonal();
    Eigen::MatrixXcd C = blk.matrix;
    C.diagonal().array() -= omega;
    C = w.cwiseInverse().cast<cplx>().asDiagonal() * C * w.cwiseInverse().cast<cplx>().asDiagonal();
    C.diagonal().array() -= cplx(0.0, nu);
    const Eigen::MatrixXcd rhs = C.partialPivLu().inverse();
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
    scale = std::max(scale, rhs.cwiseAbs().maxCoeff());
  }
  if (P.kind() == OperatorKind::Diagonal) {
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      const cplx lhs = q[i] / (P.diagonal()[i] - omega - cplx(0.0, nu) * q[i]);
      const cplx rhs = 1.0 / ((P.diagonal()[i] - omega) / q[i] - cplx(0.0, nu));
      worst = std::max(worst, std::abs(lhs - rhs));
      scale = std::max(scale, std::abs(rhs));
    }
  }
  rep.identity_error = scale > 0.0 ? worst / scale : worst;
  return rep;
}

std::vector<cplx> spectrum_Pnu(const TruncatedOperator& P, const TruncatedOperator& Q, double nu,
                               std::size_t budget) {
  require_same_truncation(P, Q);
  const auto& q = q_diagonal(Q);
  std::vector<cplx> ev;
  ev.reserve(P.dim());
  switch (P.kind()) {
    case OperatorKind::MatrixFree: throw TooLargeForDense("spectrum_Pnu needs a dense operator");
    case OperatorKind::Diagonal:
      for (Eigen::Index i = 0; i < q.size(); ++i) ev.push_back(P.diagonal()[i] - cplx(0.0, nu) * q[i]);
      break;
    case OperatorKind::Dense:
      if (P.max_block_dim() > budget) throw TooLargeForDense("block exceeds dense budget");
      for (const auto& b : P.blocks()) {
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(viscous_block(b, q, nu, 0.0), false);
        if (es.info() != Eigen::Success) throw std::runtime_error("complex eigensolver failed");
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) ev.push_back(es.eigenvalues()[i]);
      }
      break;
  }
  std::sort(ev.begin(), ev.end(), [](cplx a, cplx b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return ev;
}

double resolvent_estimate_bound(cplx lambda, double norm_P, double nu) {
  double bound = std::numeric_limits<double>::infinity();
  const double re_gap = std::abs(lambda.real()) - norm_P;
  const double im_gap = lambda.imag() + nu;
  if (re_gap > 0.0) bound = std::min(bound, 1.0 / re_gap);
  if (im_gap > 0.0) bound = std::min(bound, 1.0 / im_gap);
  return bound;
}

// ---------------------------------------------------------------------------
// Scaling scan

namespace {

Eigen::VectorXcd smooth_probe(int N) {
  const ModeSet ms(N);
  Eigen::VectorXcd f(ms.size());
  for (int i = 0; i < static_cast<int>(ms.size()); ++i)
    f[i] = std::exp(-0.25 * (ms.k1(i) * ms.k1(i) + ms.k2(i) * ms.k2(i)));
  return f;
}

struct NormPair {
  double Hs = 0.0;
  double L2_to_Hs = 0.0;
  double residual = 0.0;
};

NormPair scan_point(const TruncatedOperator& P, const TruncatedOperator& Q, double omega, double nu, double s,
                    const SolverOptions& opts) {
  const TruncatedOperator R = resolvent_operator(P, Q, omega, nu, opts);
  NormPair out;
  out.Hs = operator_norm(R, s, s);
  out.L2_to_Hs = operator_norm(R, 0.0, s);
  const Eigen::VectorXcd f = smooth_probe(P.N());
  out.residual = (viscous_apply(P, Q, nu, omega, R.apply(f)) - f).norm() / f.norm();
  return out;
}

}  // namespace

ScalingScanResult resolvent_scaling_scan(const TruncatedOperator& P, const TruncatedOperator& Q,
                                         const std::vector<double>& omega_grid, const std::vector<double>& nu_grid,
                                         double s, const ScalingScanOptions& opts) {
  if (omega_grid.empty() || nu_grid.empty()) throw std::invalid_argument("scan grids must be non-empty");
  const bool doubling = opts.P_coarse != nullptr && opts.Q_coarse != nullptr;
  ScalingScanResult result;
  result.records.resize(omega_grid.size() * nu_grid.size());
  parallel_for(result.records.size(), opts.jobs, [&](std::size_t idx) {
    const std::size_t in = idx / omega_grid.size(), io = idx % omega_grid.size();
    ScanRecord& rec = result.records[idx];
    rec.symbol = P.info.symbol.empty() ? "operator" : P.info.symbol;
    rec.N = P.N();
    rec.omega = omega_grid[io];
    rec.nu = nu_grid[in];
    rec.s = s;
    try {
      const NormPair fine = scan_point(P, Q, rec.omega, rec.nu, s, opts.solver);
      rec.norm_Hs = fine.Hs;
      rec.norm_L2_to_Hs = fine.L2_to_Hs;
      rec.residual = fine.residual;
      if (doubling) {
        const NormPair coarse = scan_point(*opts.P_coarse, *opts.Q_coarse, rec.omega, rec.nu, s, opts.solver);
        rec.coarse_norm_Hs = coarse.Hs;
        rec.coarse_norm_L2_to_Hs = coarse.L2_to_Hs;
        const double change = std::max(std::abs(fine.Hs - coarse.Hs) / fine.Hs,
                                        std::abs(fine.L2_to_Hs - coarse.L2_to_Hs) / fine.L2_to_Hs);
        rec.converged = change < opts.doubling_tol;
        if (!rec.converged) rec.flags.push_back("truncation-unconverged");
      }
      if (P.N() > 0 && P.N() < 4.0 / std::sqrt(rec.nu)) rec.flags.push_back("truncation-rule");
    } catch (const std::exception& e) {
      rec.converged = false;
      rec.error = e.what();
      rec.flags.push_back("error");
    }
    if (!opts.hypothesis_verified) rec.flags.push_back("hypothesis-unverified");
  });
  if (!opts.hypothesis_verified) result.flags.push_back("hypothesis-unverified");

  // nu values at which every omega is converged.
  std::vector<double> xs, ys_hs, ys_l2;
  for (std::size_t in = 0; in < nu_grid.size(); ++in) {
    bool ok = true;
    double m_hs = 0.0, m_l2 = 0.0;
    for (std::size_t io = 0; io < omega_grid.size(); ++io) {
      const auto& r = result.records[in * omega_grid.size() + io];
      ok = ok && r.converged && r.error.empty();
      m_hs = std::max(m_hs, r.norm_Hs);
      m_l2 = std::max(m_l2, r.norm_L2_to_Hs);
    }
    if (!ok) continue;
    result.fit_nus.push_back(nu_grid[in]);
    xs.push_back(std::log(1.0 / nu_grid[in]));
    ys_hs.push_back(std::log(m_hs));
    ys_l2.push_back(std::log(m_l2));
  }
  result.slope_Hs = fit_slope(xs, ys_hs);
  result.slope_L2_to_Hs = fit_slope(xs, ys_l2);
  if (result.fit_nus.size() < 2) result.flags.push_back("insufficient-converged-range");
  for (std::size_t io = 0; io < omega_grid.size(); ++io) {
    std::vector<double> x, yh, yl;
    for (std::size_t in = 0; in < nu_grid.size(); ++in) {
      const auto& r = result.records[in * omega_grid.size() + io];
      if (!r.converged || !r.error.empty()) continue;
      x.push_back(std::log(1.0 / r.nu));
      yh.push_back(std::log(r.norm_Hs));
      yl.push_back(std::log(r.norm_L2_to_Hs));
    }
    result.per_omega_slope_Hs.emplace_back(omega_grid[io], fit_slope(x, yh));
    result.per_omega_slope_L2_to_Hs.emplace_back(omega_grid[io], fit_slope(x, yl));
  }
  return result;
}

void write_scan_csv(const ScalingScanResult& result, std::ostream& os) {
  os << "symbol,N,omega,nu,s,norm_Hs,norm_L2_to_Hs,residual,flags\n";
  os.precision(17);
  for (const auto& r : result.records) {
    std::string flags;
    for (const auto& f : r.flags) flags += (flags.empty() ? "" : ";") + f;
    os << r.symbol << ',' << r.N << ',' << r.omega << ',' << r.nu << ',' << r.s << ',' << r.norm_Hs << ','
       << r.norm_L2_to_Hs << ',' << r.residual << ',' << flags << '\n';
  }
}

// ---------------------------------------------------------------------------
// Limiting absorption

LimitingResult limiting_resolvent(const TruncatedOperator& P, double omega, const SpectralField& f,
                                  const std::vector<double>& nu_seq, const LimitingOptions& opts) {
  if (nu_seq.size() < 2) throw std::invalid_argument("limiting_resolvent needs at least two nu values");
  for (std::size_t i = 0; i < nu_seq.size(); ++i) {
    if (!(nu_seq[i] > 0.0)) throw std::invalid_argument("nu values must be positive");
    if (i > 0 && !(nu_seq[i] < nu_seq[i - 1])) throw std::invalid_argument("nu sequence must be decreasing");
  }
  const HermitianEigensystem es(P, opts.dense_budget);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double gap = (ev.array() - omega).abs().minCoeff();
  if (gap <= opts.eigen_gap) {
    std::ostringstream msg;
    msg << "omega = " << omega << " lies within " << gap << " of a truncated eigenvalue";
    throw NearEigenvalue(msg.str());
  }
  const TruncatedOperator I = TruncatedOperator::identity(P.N());
  std::vector<SpectralField> u;
  u.reserve(nu_seq.size());
  for (double nu : nu_seq) u.push_back(solve_resolvent(P, I, omega, nu, f, {opts.dense_budget}));

  LimitingResult out;
  for (std::size_t i = 1; i < u.size(); ++i)
    out.increments.push_back(sobolev_norm(u[i].coeffs - u[i - 1].coeffs, f.N, opts.s));
  for (std::size_t i = 1; i < out.increments.size(); ++i)
    out.cauchy = out.cauchy && out.increments[i] < out.increments[i - 1];
  const std::size_t n = u.size();
  const double a = nu_seq[n - 2], b = nu_seq[n - 1];
  out.field = SpectralField(f.N, (a * u[n - 1].coeffs - b * u[n - 2].coeffs) / (a - b));
  out.last = u[n - 1];
  out.estimate = sobolev_norm(out.field.coeffs - out.last.coeffs, f.N, opts.s);
  if (opts.require_cauchy && !out.cauchy) {
    std::ostringstream msg;
    msg << "increments do not decrease:";
    for (double d : out.increments) msg << ' ' << d;
    throw NotCauchy(msg.str());
  }
  return out;
}

}  // namespace iwave
