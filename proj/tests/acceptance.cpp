// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance [--only k[,k...]] [--jobs n]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "CLI11.hpp"

#include "iwave/dynamics.hpp"
#include "iwave/errors.hpp"
#include "iwave/evolution.hpp"
#include "iwave/linalg.hpp"
#include "iwave/modes.hpp"
#include "iwave/quantize.hpp"
#include "iwave/resolvent.hpp"
#include "iwave/symbol.hpp"

using namespace iwave;

namespace {

unsigned g_jobs = 1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

SpectralField gaussian(int N, double width = 2.0) {
  const ModeSet m(N);
  SpectralField f = SpectralField::zeros(N);
  for (int i = 0; i < static_cast<int>(m.size()); ++i)
    f.coeffs[i] = std::exp(-(m.k1(i) * m.k1(i) + m.k2(i) * m.k2(i)) / (width * width));
  return f;
}

Eigen::MatrixXcd dense_Pnu(const TruncatedOperator& P, const TruncatedOperator& Q, double nu) {
  Eigen::MatrixXcd M = P.to_dense();
  M.diagonal() -= cplx(0.0, nu) * Q.diagonal();
  return M;
}

Outcome c1_la1() {
  const auto sym = shear_symbol(0.3);
  const auto P = assemble_P(sym, 16);
  const auto Q = assemble_Q(16);
  double worst = 0.0, worst_id = 0.0;
  bool ok = true;
  for (double nu : {1e-1, 1e-2, 1e-3})
    for (double omega : {-0.2, 0.0, 0.2}) {
      const La1Report r = check_la1(P, Q, omega, nu);
      worst = std::max(worst, r.measured * nu);
      worst_id = std::max(worst_id, r.identity_error);
      ok = ok && r.measured <= (1.0 / nu) * (1.0 + 1e-10);
    }
  return {ok, "max nu*||R||_{H^-1->H^1} = " + fmt("%.12f", worst) + ", identity error " + fmt("%.1e", worst_id)};
}

Outcome c2_spectrum() {
  const double nu = 0.05;
  const auto Q = assemble_Q(12);
  bool ok = true;
  std::string detail;
  for (const auto& sym : {shear_symbol(0.3), two_param_symbol(0.3, 0.1, 0.0)}) {
    const auto P = assemble_P(sym, 12);
    const double norm_P = operator_norm(P, 0.0, 0.0);
    double im_excess = -1e300, re_excess = -1e300;
    for (cplx l : spectrum_Pnu(P, Q, nu)) {
      im_excess = std::max(im_excess, l.imag() + nu);
      re_excess = std::max(re_excess, std::abs(l.real()) - norm_P);
    }
    ok = ok && im_excess <= 1e-10 && re_excess <= 1e-10;
    detail += sym.name() + ": max(Im+nu) = " + fmt("%.2e", im_excess) + ", max(|Re|-||P||) = " +
              fmt("%.2e", re_excess) + "; ";
  }
  return {ok, detail};
}

Outcome c3_resolvent_estimate() {
  const double nu = 0.05;
  const auto P = assemble_P(shear_symbol(0.3), 8);
  const auto Q = assemble_Q(8);
  const double norm_P = operator_norm(P, 0.0, 0.0);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> re(-2.0 * norm_P, 2.0 * norm_P), im(-1.0, 1.0);
  int tested = 0;
  double worst = 0.0;
  bool ok = true;
  while (tested < 20) {
    const cplx lambda(re(rng), im(rng));
    const double bound = resolvent_estimate_bound(lambda, norm_P, nu);
    if (!std::isfinite(bound)) continue;
    const double measured = operator_norm(resolvent_operator(P, Q, lambda, nu), 0.0, 0.0);
    worst = std::max(worst, measured / bound);
    ok = ok && measured <= bound * (1.0 + 1e-8);
    ++tested;
  }
  return {ok, "20 points, max measured/bound = " + fmt("%.6f", worst)};
}

Outcome c4_contour() {
  double worst = 0.0;
  for (int N : {4, 6, 8}) {
    const auto P = assemble_P(shear_symbol(0.3), N);
    const auto Q = assemble_Q(N);
    const SpectralField f = gaussian(N);
    for (double nu : {0.1, 0.02}) {
      const Eigen::MatrixXcd A = dense_Pnu(P, Q, nu);
      for (double t : {0.1, 1.0, 10.0}) {
        ContourParams cp;
        cp.jobs = g_jobs;
        const SpectralField u = semigroup_contour(P, Q, nu, t, f, cp);
        const Eigen::MatrixXcd E = (cplx(0.0, -t) * A).exp();
        const Eigen::VectorXcd ref = E * f.coeffs;
        worst = std::max(worst, (u.coeffs - ref).norm() / ref.norm());
      }
    }
  }
  return {worst < 1e-6, "max relative error vs dense exponential = " + fmt("%.2e", worst)};
}

Outcome c5_decomposition() {
  double worst_id = 0.0, worst_defect = 0.0, worst_path = 0.0;
  {
    const auto P = assemble_P(shear_symbol(0.3), 8);
    const auto Q = assemble_Q(8);
    const SpectralField f = gaussian(8);
    for (double nu : {0.1, 0.01})
      for (double t : {1.0, 10.0, 100.0}) {
        DecompositionOptions o;
        o.contour.jobs = g_jobs;
        o.cross_check = true;
        const auto d = decompose(P, Q, nu, t, f, 0.1, 0.5, o);
        worst_id = std::max(worst_id, d.identity_error);
        worst_defect = std::max(worst_defect, d.quadrature_defect);
      }
  }
  {
    const auto P = assemble_P(shear_symbol(0.3), 4);
    const auto Q = assemble_Q(4);
    const SpectralField f = gaussian(4);
    for (double nu : {0.1, 0.01})
      for (double t : {1.0, 10.0, 100.0}) {
        DecompositionOptions o;
        o.contour.jobs = g_jobs;
        o.cross_check = true;
        const auto d = decompose(P, Q, nu, t, f, 0.1, 0.5, o);
        worst_path = std::max(worst_path, d.path_difference);
      }
  }
  return {worst_id < 1e-8 && worst_defect < 1e-8 && worst_path < 1e-5,
          "identity error " + fmt("%.2e", worst_id) + ", quadrature defect " + fmt("%.2e", worst_defect) +
              ", e subtraction vs direct (N=4) " + fmt("%.2e", worst_path)};
}

Outcome c6_contraction() {
  const auto P = assemble_P(shear_symbol(0.3), 8);
  const auto Q = assemble_Q(8);
  const SpectralField f = gaussian(8);
  std::vector<double> ts;
  for (int i = 0; i <= 200; ++i) ts.push_back(0.25 * i);
  bool ok = true;
  double worst = 0.0;
  for (double nu : {0.1, 0.01, 0.001}) {
    const ContractionReport r = contraction_check(P, Q, nu, f, ts, 1e-8);
    ok = ok && r.holds;
    worst = std::max(worst, r.max_ratio);
  }
  return {ok, "max ||e^{-itP_nu}f|| / (e^{-t nu}||f||) = " + fmt("%.12f", worst)};
}

bool certify(const HomogeneousSymbol& sym, double delta, SimpleStructureReport* out = nullptr) {
  SimpleStructureOptions so;
  so.detection.jobs = g_jobs;
  const auto rep = verify_simple_structure(sym, delta, 500, so);
  if (out) *out = rep;
  return rep.verdict == "pass";
}

Outcome c7_scaling() {
  const auto sym = shear_symbol(0.3);
  const bool verified = certify(sym, 0.1);
  const int N = 64;
  const auto P = assemble_P(sym, N);
  const auto Q = assemble_Q(N);
  const auto Pc = assemble_P(sym, N / 2);
  const auto Qc = assemble_Q(N / 2);
  ScalingScanOptions so;
  so.P_coarse = &Pc;
  so.Q_coarse = &Qc;
  so.hypothesis_verified = verified;
  so.jobs = g_jobs;
  std::vector<double> nus;
  for (int i = 0; i <= 6; ++i) nus.push_back(0.1 * std::pow(0.5, i));
  const auto res = resolvent_scaling_scan(P, Q, {-0.05, 0.0, 0.05}, nus, -0.6, so);

  const auto Pf = assemble_P(free_symbol(), 8);
  const auto Qf = assemble_Q(8);
  ScalingScanOptions sf;
  sf.hypothesis_verified = true;
  const auto control = resolvent_scaling_scan(Pf, Qf, {0.0}, {1e-1, 1e-2, 1e-3}, -0.6, sf);

  const bool ok = verified && res.slope_Hs <= 1.0 / 3.0 + 0.1 && res.slope_L2_to_Hs <= 1.0 / 6.0 + 0.1 &&
                  std::abs(control.slope_Hs - 1.0) < 0.05;
  std::ostringstream os;
  os << "certified " << (verified ? "yes" : "no") << ", fit on " << res.fit_nus.size() << " nus down to "
     << (res.fit_nus.empty() ? 0.0 : res.fit_nus.back()) << ": slope B(H^-0.6) = " << fmt("%.4f", res.slope_Hs)
     << " (bound 0.4333), slope B(L2,H^-0.6) = " << fmt("%.4f", res.slope_L2_to_Hs)
     << " (bound 0.2667), diagonal control slope = " << fmt("%.4f", control.slope_Hs);
  return {ok, os.str()};
}

TimescaleOptions timescale_options(const HomogeneousSymbol& sym, bool verified) {
  TimescaleOptions to;
  to.max_spatial_gradient = sym.max_spatial_gradient();
  to.hypothesis_verified = verified;
  to.jobs = g_jobs;
  return to;
}

Outcome c8_timescale() {
  const auto sym = shear_symbol(0.3);
  const int N = 32;
  const auto P = assemble_P(sym, N);
  const auto Q = assemble_Q(N);
  const SpectralField f = gaussian(N);
  TimescaleOptions coarse = timescale_options(sym, true);
  coarse.convergence_window = false;
  std::vector<double> nus_coarse, nus_fine;
  for (int i = 0; i <= 6; ++i) nus_coarse.push_back(0.1 * std::pow(0.5, i));
  for (int i = 0; i <= 12; ++i) nus_fine.push_back(0.1 * std::pow(0.5, 0.5 * i));
  const auto a = timescale_scan(P, Q, f, 0.15, nus_coarse, -0.6, coarse);
  TimescaleOptions fine = coarse;
  fine.points_per_decade = 32;
  const auto b = timescale_scan(P, Q, f, 0.15, nus_fine, -0.6, fine);
  const double growth = b.max_b_over_f1 / a.max_b_over_f1 - 1.0;
  const bool ok = a.delta2 > 0.0 && b.delta2 > 0.0 && growth < 0.1;
  return {ok, "delta2 = " + fmt("%.4f", a.delta2) + " (refined " + fmt("%.4f", b.delta2) +
                  "; across nu at t* only " + fmt("%.4f", a.delta2_tstar) + "), max ||b||/||f||_H1 = " +
                  fmt("%.4f", a.max_b_over_f1) + " -> " + fmt("%.4f", b.max_b_over_f1) + " under refinement"};
}

Outcome c9_convergence() {
  const auto sym = shear_symbol(0.3);
  const int N = 32;
  const auto P = assemble_P(sym, N);
  const auto Q = assemble_Q(N);
  const SpectralField f = gaussian(N);
  TimescaleOptions to = timescale_options(sym, true);
  to.window_lo = to.window_hi = 1.0;
  const auto res = timescale_scan(P, Q, f, 0.15, {0.1, 0.05, 0.025, 0.0125}, -0.6, to);
  bool ok = res.sup_discrepancy.size() == 4;
  std::ostringstream os;
  os << "T_max = " << fmt("%.2f", res.T_max) << ", sup discrepancy:";
  for (std::size_t i = 0; i < res.sup_discrepancy.size(); ++i) {
    os << ' ' << fmt("%.4f", res.sup_discrepancy[i].second);
    if (i > 0) ok = ok && res.sup_discrepancy[i].second < res.sup_discrepancy[i - 1].second;
  }
  if (!res.sup_stationary.empty()) {
    os << "; against the stationary profile:";
    for (const auto& [nu, v] : res.sup_stationary) os << ' ' << fmt("%.4f", v);
  }
  return {ok, os.str()};
}

Outcome c10_dynamics() {
  SimpleStructureReport free_rep, shear_rep;
  certify(free_symbol(), 0.1, &free_rep);
  const bool free_fails = free_rep.verdict == "fail" && free_rep.coverage == 0.0;
  const bool shear_pass = certify(shear_symbol(0.3), 0.1, &shear_rep);
  double monotone = 0.0;
  if (shear_pass) {
    EscapeOptions eo;
    eo.jobs = g_jobs;
    monotone = build_escape_function(shear_symbol(0.3), shear_rep.attractors, 0.1, eo).monotone_fraction;
  }
  const bool ok = free_fails && shear_pass && shear_rep.coverage >= 0.99 && monotone >= 0.99;
  return {ok, "free: " + free_rep.verdict + " coverage " + fmt("%.3f", free_rep.coverage) + "; shear 0.3: " +
                  shear_rep.verdict + " coverage " + fmt("%.4f", shear_rep.coverage) + ", X k >= beta/2 on " +
                  fmt("%.4f", monotone) + " of samples"};
}

Outcome c11_oracles() {
  std::ostringstream os;
  bool ok = true;
  // Entrywise collocation oracle for the matrix of P at N = 2.
  {
    const auto sym = two_param_symbol(0.3, 0.1, 0.0);
    const int N = 2;
    const ModeSet m(N);
    const auto P = assemble_P(sym, N);
    const Eigen::MatrixXcd A = P.to_dense();
    const int G = 32;
    Eigen::MatrixXcd B(m.size(), m.size());
    for (int j = 0; j < static_cast<int>(m.size()); ++j)
      for (int k = 0; k < static_cast<int>(m.size()); ++k) {
        const double theta = (m.k1(k) == 0 && m.k2(k) == 0) ? 0.0 : std::atan2(m.k2(k), m.k1(k));
        cplx acc = 0.0;
        for (int a = 0; a < G; ++a)
          for (int b = 0; b < G; ++b) {
            const double x1 = kTwoPi * a / G, x2 = kTwoPi * b / G;
            double p = sym(x1, x2, theta);
            if (m.k1(k) == 0 && m.k2(k) == 0) {
              p = 0.0;
              for (int r = 0; r < 256; ++r) p += sym(x1, x2, kTwoPi * r / 256) / 256.0;
            }
            acc += p * std::exp(cplx(0.0, -((m.k1(j) - m.k1(k)) * x1 + (m.k2(j) - m.k2(k)) * x2)));
          }
        B(j, k) = acc / static_cast<double>(G * G);
      }
    const Eigen::MatrixXcd Bh = 0.5 * (B + B.adjoint());
    const double err = (A - Bh).norm() / Bh.norm();
    ok = ok && err < 1e-12;
    os << "collocation " << fmt("%.1e", err);
  }
  // Operator norm: dense route vs an eigenvalue oracle and the matrix-free route.
  {
    const auto sym = shear_symbol(0.3);
    const int N = 3;
    const ModeSet m(N);
    AssemblyOptions mf;
    mf.force_matrix_free = true;
    const auto P = assemble_P(sym, N);
    const auto Pm = assemble_P(sym, N, mf);
    const auto R = resolvent_operator(P, assemble_Q(N), cplx(0.1, 0.0), 0.05);
    const double a = -0.6, b = -0.6;
    Eigen::MatrixXcd B = R.to_dense();
    const Eigen::VectorXd wa = m.q_power(-a / 2.0), wb = m.q_power(b / 2.0);
    B = wb.asDiagonal() * B * wa.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(B.adjoint() * B);
    const double oracle = std::sqrt(es.eigenvalues().maxCoeff());
    const double err_dense = std::abs(operator_norm(R, a, b) - oracle) / oracle;
    const double oracle_P = std::sqrt(
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(P.to_dense().adjoint() * P.to_dense()).eigenvalues().maxCoeff());
    const double err_mf = std::abs(operator_norm(Pm, 0.0, 0.0) - oracle_P) / oracle_P;
    ok = ok && err_dense < 1e-10 && err_mf < 1e-8;
    os << ", norm dense " << fmt("%.1e", err_dense) << ", norm matrix-free " << fmt("%.1e", err_mf);
  }
  // Propagation backends.
  {
    const int N = 6;
    const auto P = assemble_P(shear_symbol(0.3), N);
    const auto Q = assemble_Q(N);
    const SpectralField f = gaussian(N);
    PropagateOptions ea, sp;
    ea.backend = Backend::Eigenbasis;
    sp.backend = Backend::Splitting;
    double worst = 0.0;
    for (double t : {0.5, 5.0, 20.0}) {
      const auto u1 = propagate(P, Q, 0.05, f, 0.2, t, ea);
      const auto u2 = propagate(P, Q, 0.05, f, 0.2, t, sp);
      worst = std::max(worst, (u1.coeffs - u2.coeffs).norm() / u1.coeffs.norm());
    }
    ok = ok && worst < 1e-6;
    os << ", backends " << fmt("%.1e", worst);
  }
  // Forward then backward flow returns to the start.
  {
    const auto sym = shear_symbol(0.3);
    const auto starts = sample_energy_shell(sym, 0.05, 20, 5);
    double worst = 0.0;
    for (const auto& q : starts) {
      const auto fw = integrate_flow(sym, q, 20.0, 1e-2);
      const auto bw = integrate_flow(sym, fw.points.back(), -20.0, 1e-2);
      const FlowPoint& e = bw.points.back();
      const double d = std::abs(angle_diff(e.x1, q.x1)) + std::abs(angle_diff(e.x2, q.x2)) +
                       std::abs(angle_diff(e.theta, q.theta)) + std::abs(e.rho - q.rho);
      worst = std::max(worst, d);
    }
    ok = ok && worst < 1e-6;
    os << ", flow return " << fmt("%.1e", worst);
  }
  return {ok, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "Criteria to run")->delimiter(',');
  app.add_option("--jobs", g_jobs, "Worker threads");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"resolvent bound B(H^-1,H^1) <= 1/nu", c1_la1},
      {"spectrum containment", c2_spectrum},
      {"numerical-range resolvent estimate", c3_resolvent_estimate},
      {"contour representation of the semigroup", c4_contour},
      {"three-term decomposition identity", c5_decomposition},
      {"contraction bound", c6_contraction},
      {"resolvent scaling exponents", c7_scaling},
      {"dissipation-onset decay and bounded part", c8_timescale},
      {"convergence to the inviscid solution", c9_convergence},
      {"dynamics certification", c10_dynamics},
      {"oracle equivalences", c11_oracles},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (out.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << criteria[i].first << "  ["
              << out.detail << "]  (" << fmt("%.1f", secs) << " s)" << std::endl;
    failures += out.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
