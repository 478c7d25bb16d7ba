#include "iwave/linalg.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <stdexcept>

namespace iwave {

cplx expm1_rel(cplx z) {
  if (std::abs(z) < 0.5) {
    // Taylor series 1 + z/2! + z^2/3! + ...; 24 terms reach double precision here.
    cplx term = 1.0, sum = 1.0;
    for (int n = 2; n <= 25; ++n) {
      term *= z / static_cast<double>(n);
      sum += term;
    }
    return sum;
  }
  return (std::exp(z) - 1.0) / z;
}

const QuadratureRule& gauss_legendre(int n) {
  static std::mutex mutex;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  if (n < 1) throw std::invalid_argument("quadrature order must be positive");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

GmresResult gmres(const LinearMap& A, const LinearMap& precond, const Eigen::VectorXcd& b, double tol, int restart,
                  int max_iter) {
  const Eigen::Index n = b.size();
  GmresResult out;
  out.x = Eigen::VectorXcd::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    out.converged = true;
    return out;
  }
  Eigen::VectorXcd r = b;
  double rnorm = bnorm;
  while (out.iterations < max_iter) {
    const int m = restart;
    Eigen::MatrixXcd V(n, m + 1);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
    std::vector<cplx> cs(m), sn(m);
    Eigen::VectorXcd g = Eigen::VectorXcd::Zero(m + 1);
    V.col(0) = r / rnorm;
    g[0] = rnorm;
    int j = 0;
    for (; j < m && out.iterations < max_iter; ++j, ++out.iterations) {
      Eigen::VectorXcd w = A(precond(V.col(j)));
      for (int pass = 0; pass < 2; ++pass)
        for (int i = 0; i <= j; ++i) {
          const cplx h = V.col(i).dot(w);
          H(i, j) += h;
          w -= h * V.col(i);
        }
      H(j + 1, j) = w.norm();
      if (std::abs(H(j + 1, j)) > 0.0) V.col(j + 1) = w / H(j + 1, j).real();
      for (int i = 0; i < j; ++i) {
        const cplx t = std::conj(cs[i]) * H(i, j) + std::conj(sn[i]) * H(i + 1, j);
        H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
        H(i, j) = t;
      }
      const double denom = std::hypot(std::abs(H(j, j)), std::abs(H(j + 1, j)));
      cs[j] = H(j, j) / denom;
      sn[j] = H(j + 1, j) / denom;
      H(j, j) = denom;
      H(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = std::conj(cs[j]) * g[j];
      if (std::abs(g[j + 1]) < tol * bnorm) {
        ++j;
        ++out.iterations;
        break;
      }
    }
    Eigen::VectorXcd y = H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
    out.x += precond(V.leftCols(j) * y);
    r = b - A(out.x);
    rnorm = r.norm();
    out.relative_residual = rnorm / bnorm;
    if (out.relative_residual < tol) {
      out.converged = true;
      return out;
    }
  }
  return out;
}

NormEstimate largest_singular_value(const LinearMap& B, const LinearMap& B_adjoint, Eigen::Index dim, double tol,
                                    int max_iter) {
  NormEstimate est;
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> gauss;
  Eigen::VectorXcd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = cplx(gauss(rng), gauss(rng));
  v.normalize();
  const int kmax = static_cast<int>(std::min<Eigen::Index>(max_iter, dim));
  Eigen::MatrixXcd V(dim, kmax);
  std::vector<double> alpha, beta;
  double previous = -1.0;
  for (int j = 0; j < kmax; ++j) {
    V.col(j) = v;
    Eigen::VectorXcd w = B_adjoint(B(v));
    const double a = v.dot(w).real();
    alpha.push_back(a);
    for (int pass = 0; pass < 2; ++pass) w -= V.leftCols(j + 1) * (V.leftCols(j + 1).adjoint() * w);
    const double bnext = w.norm();
    const int k = j + 1;
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    const double top = es.eigenvalues()[k - 1];
    const double resid = bnext * std::abs(es.eigenvectors()(k - 1, k - 1));
    est.iterations = k;
    est.value = std::sqrt(std::max(top, 0.0));
    if (resid <= tol * std::max(top, 1e-300) || k == dim ||
        (previous >= 0.0 && std::abs(top - previous) <= 1e-3 * tol * top && resid <= 1e2 * tol * top)) {
      est.converged = true;
      return est;
    }
    previous = top;
    if (bnext < 1e-300) {
      est.converged = true;
      return est;
    }
    beta.push_back(bnext);
    v = w / bnext;
  }
  return est;
}

ShiftedSolver::ShiftedSolver(const Eigen::MatrixXcd& M) {
  Eigen::HessenbergDecomposition<Eigen::MatrixXcd> hd(M);
  H_ = hd.matrixH();
  Q_ = hd.matrixQ();
}

Eigen::VectorXcd ShiftedSolver::solve(cplx z, const Eigen::VectorXcd& b) const {
  const Eigen::Index n = H_.rows();
  Eigen::MatrixXcd A = H_;
  A.diagonal().array() -= z;
  Eigen::VectorXcd y = Q_.adjoint() * b;
  // Gaussian elimination with partial pivoting; only one subdiagonal entry per column.
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    if (std::abs(A(k + 1, k)) > std::abs(A(k, k))) {
      A.row(k).segment(k, n - k).swap(A.row(k + 1).segment(k, n - k));
      std::swap(y[k], y[k + 1]);
    }
    if (A(k, k) == cplx(0.0)) throw std::runtime_error("singular shifted Hessenberg system");
    const cplx l = A(k + 1, k) / A(k, k);
    A.row(k + 1).segment(k, n - k) -= l * A.row(k).segment(k, n - k);
    y[k + 1] -= l * y[k];
  }
  y = A.triangularView<Eigen::Upper>().solve(y);
  return Q_ * y;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) return std::nan("");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : std::nan("");
}

}  // namespace iwave
