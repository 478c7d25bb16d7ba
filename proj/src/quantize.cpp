#include "iwave/quantize.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"

#include "fft.hpp"
#include "iwave/errors.hpp"
#include "union_find.hpp"

namespace iwave {

const char* to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::Dense: return "dense";
    case OperatorKind::Diagonal: return "diagonal";
    case OperatorKind::MatrixFree: return "matrix-free";
  }
  return "unknown";
}

TruncatedOperator TruncatedOperator::make_diagonal(int N, Eigen::VectorXcd entries, bool hermitian) {
  if (static_cast<std::size_t>(entries.size()) != ModeSet(N).size())
    throw std::invalid_argument("diagonal size does not match the mode set");
  TruncatedOperator op;
  op.N_ = N;
  op.kind_ = OperatorKind::Diagonal;
  op.hermitian_ = hermitian;
  op.diag_ = std::make_shared<const Eigen::VectorXcd>(std::move(entries));
  return op;
}

TruncatedOperator TruncatedOperator::make_dense(int N, std::vector<DenseBlock> blocks, bool hermitian) {
  const std::size_t dim = ModeSet(N).size();
  std::vector<char> covered(dim, 0);
  Eigen::VectorXcd diag = Eigen::VectorXcd::Zero(dim);
  for (const auto& b : blocks) {
    if (b.matrix.rows() != static_cast<Eigen::Index>(b.modes.size()) || b.matrix.cols() != b.matrix.rows())
      throw std::invalid_argument("block matrix does not match its mode list");
    for (std::size_t i = 0; i < b.modes.size(); ++i) {
      const int m = b.modes[i];
      if (m < 0 || static_cast<std::size_t>(m) >= dim || covered[m])
        throw std::invalid_argument("blocks must partition the mode set");
      covered[m] = 1;
      diag[m] = b.matrix(i, i);
    }
  }
  for (std::size_t m = 0; m < dim; ++m)
    if (!covered[m]) blocks.push_back({{static_cast<int>(m)}, Eigen::MatrixXcd::Zero(1, 1)});
  std::sort(blocks.begin(), blocks.end(),
            [](const DenseBlock& a, const DenseBlock& b) { return a.modes.front() < b.modes.front(); });
  TruncatedOperator op;
  op.N_ = N;
  op.kind_ = OperatorKind::Dense;
  op.hermitian_ = hermitian;
  op.blocks_ = std::make_shared<const std::vector<DenseBlock>>(std::move(blocks));
  op.diag_ = std::make_shared<const Eigen::VectorXcd>(std::move(diag));
  return op;
}

TruncatedOperator TruncatedOperator::make_dense(int N, const Eigen::MatrixXcd& full, bool hermitian) {
  const std::size_t dim = ModeSet(N).size();
  if (full.rows() != static_cast<Eigen::Index>(dim) || full.cols() != full.rows())
    throw std::invalid_argument("matrix size does not match the mode set");
  DenseBlock b;
  b.modes.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) b.modes[i] = static_cast<int>(i);
  b.matrix = full;
  return make_dense(N, {std::move(b)}, hermitian);
}

TruncatedOperator TruncatedOperator::make_matrix_free(int N, ApplyFn apply, ApplyFn adjoint,
                                                      Eigen::VectorXcd diagonal_part, bool hermitian) {
  if (static_cast<std::size_t>(diagonal_part.size()) != ModeSet(N).size())
    throw std::invalid_argument("diagonal part size does not match the mode set");
  TruncatedOperator op;
  op.N_ = N;
  op.kind_ = OperatorKind::MatrixFree;
  op.hermitian_ = hermitian;
  op.apply_ = std::move(apply);
  op.adjoint_ = std::move(adjoint);
  op.diag_ = std::make_shared<const Eigen::VectorXcd>(std::move(diagonal_part));
  return op;
}

TruncatedOperator TruncatedOperator::identity(int N) {
  return make_diagonal(N, Eigen::VectorXcd::Ones(ModeSet(N).size()), true);
}

const std::vector<DenseBlock>& TruncatedOperator::blocks() const {
  if (kind_ != OperatorKind::Dense) throw std::logic_error("operator has no dense blocks");
  return *blocks_;
}

std::size_t TruncatedOperator::max_block_dim() const {
  switch (kind_) {
    case OperatorKind::Diagonal: return 1;
    case OperatorKind::MatrixFree: return dim();
    case OperatorKind::Dense: {
      std::size_t best = 0;
      for (const auto& b : *blocks_) best = std::max(best, b.modes.size());
      return best;
    }
  }
  return dim();
}

namespace {

Eigen::VectorXcd gather(const Eigen::VectorXcd& v, const std::vector<int>& idx) {
  Eigen::VectorXcd out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

void scatter(Eigen::VectorXcd& dst, const std::vector<int>& idx, const Eigen::VectorXcd& src) {
  for (std::size_t i = 0; i < idx.size(); ++i) dst[idx[i]] = src[i];
}

}  // namespace

Eigen::VectorXcd TruncatedOperator::apply(const Eigen::VectorXcd& v) const {
  if (static_cast<std::size_t>(v.size()) != dim()) throw std::invalid_argument("vector size mismatch");
  switch (kind_) {
    case OperatorKind::Diagonal: return diag_->cwiseProduct(v);
    case OperatorKind::MatrixFree: return apply_(v);
    case OperatorKind::Dense: {
      Eigen::VectorXcd out(v.size());
      for (const auto& b : *blocks_) scatter(out, b.modes, b.matrix * gather(v, b.modes));
      return out;
    }
  }
  return {};
}

Eigen::VectorXcd TruncatedOperator::apply_adjoint(const Eigen::VectorXcd& v) const {
  if (static_cast<std::size_t>(v.size()) != dim()) throw std::invalid_argument("vector size mismatch");
  switch (kind_) {
    case OperatorKind::Diagonal: return diag_->conjugate().cwiseProduct(v);
    case OperatorKind::MatrixFree: return adjoint_(v);
    case OperatorKind::Dense: {
      Eigen::VectorXcd out(v.size());
      for (const auto& b : *blocks_) scatter(out, b.modes, b.matrix.adjoint() * gather(v, b.modes));
      return out;
    }
  }
  return {};
}

SpectralField TruncatedOperator::apply(const SpectralField& u) const {
  if (u.N != N_) throw std::invalid_argument("field truncation does not match operator");
  return SpectralField(N_, apply(u.coeffs));
}

Eigen::MatrixXcd TruncatedOperator::to_dense(std::size_t max_dim) const {
  const std::size_t n = dim();
  if (n > max_dim) throw TooLargeForDense("dimension " + std::to_string(n) + " exceeds " + std::to_string(max_dim));
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(n, n);
  switch (kind_) {
    case OperatorKind::Diagonal: A.diagonal() = *diag_; break;
    case OperatorKind::Dense:
      for (const auto& b : *blocks_)
        for (std::size_t i = 0; i < b.modes.size(); ++i)
          for (std::size_t j = 0; j < b.modes.size(); ++j) A(b.modes[i], b.modes[j]) = b.matrix(i, j);
      break;
    case OperatorKind::MatrixFree:
      for (std::size_t j = 0; j < n; ++j) A.col(j) = apply_(Eigen::VectorXcd::Unit(n, j));
      break;
  }
  return A;
}

// ---------------------------------------------------------------------------
// Quantization

namespace {

double mode_angle(int k1, int k2) { return std::atan2(static_cast<double>(k2), static_cast<double>(k1)); }

constexpr int kAverageNodes = 256;

/// b(theta_k) for k != 0, trapezoid theta-average at k = 0.
Eigen::VectorXd angular_samples(const std::function<double(double)>& b, const ModeSet& ms) {
  Eigen::VectorXd out(ms.size());
  for (int i = 0; i < static_cast<int>(ms.size()); ++i) {
    const int k1 = ms.k1(i), k2 = ms.k2(i);
    if (k1 == 0 && k2 == 0) {
      double acc = 0.0;
      for (int l = 0; l < kAverageNodes; ++l) acc += b(kTwoPi * l / kAverageNodes);
      out[i] = acc / kAverageNodes;
    } else {
      out[i] = b(mode_angle(k1, k2));
    }
  }
  return out;
}

/// Shared state behind a matrix-free separable quantization.
struct SeparableState {
  int N = 0;
  std::unique_ptr<detail::Fft2> fft;
  std::vector<std::vector<cplx>> spatial;  // a_r on the grid
  std::vector<Eigen::VectorXd> angular;    // b_r(theta_k)

  std::vector<cplx> to_grid(const ModeSet& ms, const Eigen::VectorXcd& v) const {
    std::vector<cplx> g(static_cast<std::size_t>(fft->side()) * fft->side(), 0.0);
    for (int i = 0; i < v.size(); ++i) g[fft->slot(ms.k1(i), ms.k2(i))] = v[i];
    fft->backward(g);
    return g;
  }

  Eigen::VectorXcd from_grid(const ModeSet& ms, std::vector<cplx>& g) const {
    fft->forward(g);
    Eigen::VectorXcd out(ms.size());
    for (int i = 0; i < out.size(); ++i) out[i] = g[fft->slot(ms.k1(i), ms.k2(i))];
    return out;
  }

  /// Multiplication by a_r in x after b_r(theta) in xi (the unsymmetrized A).
  Eigen::VectorXcd forward_part(const Eigen::VectorXcd& v) const {
    const ModeSet ms(N);
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(v.size());
    for (std::size_t r = 0; r < spatial.size(); ++r) {
      auto g = to_grid(ms, angular[r].cast<cplx>().cwiseProduct(v));
      for (std::size_t p = 0; p < g.size(); ++p) g[p] *= spatial[r][p];
      out += from_grid(ms, g);
    }
    return out;
  }

  /// A^*: b_r(theta) after multiplication by the real a_r.
  Eigen::VectorXcd adjoint_part(const Eigen::VectorXcd& v) const {
    const ModeSet ms(N);
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(v.size());
    for (std::size_t r = 0; r < spatial.size(); ++r) {
      auto g = to_grid(ms, v);
      for (std::size_t p = 0; p < g.size(); ++p) g[p] *= std::conj(spatial[r][p]);
      out += angular[r].cast<cplx>().cwiseProduct(from_grid(ms, g));
    }
    return out;
  }
};

TruncatedOperator blocks_from_components(int N, const std::vector<std::vector<int>>& comps,
                                         const std::function<cplx(int j, int k)>& raw_entry,
                                         double drop_abs, double& defect) {
  const std::size_t dim = ModeSet(N).size();
  defect = 0.0;
  bool all_scalar = true;
  for (const auto& c : comps) all_scalar = all_scalar && c.size() == 1;
  if (all_scalar) {
    Eigen::VectorXcd d(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      const cplx a = raw_entry(static_cast<int>(i), static_cast<int>(i));
      defect = std::max(defect, 2.0 * std::abs(a.imag()));
      d[i] = std::abs(a.real()) < drop_abs ? 0.0 : a.real();
    }
    return TruncatedOperator::make_diagonal(N, std::move(d), true);
  }
  std::vector<DenseBlock> blocks;
  blocks.reserve(comps.size());
  for (const auto& c : comps) {
    const auto n = static_cast<Eigen::Index>(c.size());
    Eigen::MatrixXcd raw(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b < n; ++b) raw(a, b) = raw_entry(c[a], c[b]);
    defect = std::max(defect, (raw - raw.adjoint()).cwiseAbs().maxCoeff());
    Eigen::MatrixXcd sym = 0.5 * (raw + raw.adjoint());
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b < n; ++b)
        if (std::abs(sym(a, b)) < drop_abs) sym(a, b) = 0.0;
    blocks.push_back({c, std::move(sym)});
  }
  return TruncatedOperator::make_dense(N, std::move(blocks), true);
}

TruncatedOperator assemble_separable(const HomogeneousSymbol& sym, int N, const AssemblyOptions& opts) {
  const ModeSet ms(N);
  const int L = 4 * N + 1;
  auto state = std::make_shared<SeparableState>();
  state->N = N;
  state->fft = std::make_unique<detail::Fft2>(L);
  const auto& fft = *state->fft;

  // Fourier coefficients of every spatial factor, |m| <= 2N.
  std::vector<std::vector<cplx>> coef;
  double scale = 0.0;
  for (const auto& term : sym.separable_terms()) {
    std::vector<cplx> grid(static_cast<std::size_t>(L) * L);
    for (int i1 = 0; i1 < L; ++i1)
      for (int i2 = 0; i2 < L; ++i2) grid[fft.slot(i1, i2)] = term.spatial(kTwoPi * i1 / L, kTwoPi * i2 / L);
    state->spatial.push_back(grid);
    fft.forward(grid);
    coef.push_back(std::move(grid));
    state->angular.push_back(angular_samples(term.angular, ms));
  }
  std::vector<double> bmax(coef.size());
  for (std::size_t r = 0; r < coef.size(); ++r) {
    bmax[r] = state->angular[r].cwiseAbs().maxCoeff();
    for (const auto& c : coef[r]) scale = std::max(scale, std::abs(c) * bmax[r]);
  }
  const double drop_abs = opts.drop_tol * scale;

  // Coupling offsets m = j - k that carry weight.
  std::vector<std::array<int, 2>> support;
  for (int m1 = -2 * N; m1 <= 2 * N; ++m1)
    for (int m2 = -2 * N; m2 <= 2 * N; ++m2) {
      double w = 0.0;
      for (std::size_t r = 0; r < coef.size(); ++r) w = std::max(w, std::abs(coef[r][fft.slot(m1, m2)]) * bmax[r]);
      if (w > drop_abs || (m1 == 0 && m2 == 0)) support.push_back({m1, m2});
    }

  auto raw_entry = [&](int j, int k) {
    const int m1 = ms.k1(j) - ms.k1(k), m2 = ms.k2(j) - ms.k2(k);
    cplx acc = 0.0;
    for (std::size_t r = 0; r < coef.size(); ++r) acc += coef[r][fft.slot(m1, m2)] * state->angular[r][k];
    return acc;
  };

  double defect = 0.0;
  for (int k = 0; k < static_cast<int>(ms.size()); ++k)
    for (const auto& m : support) {
      const int j1 = ms.k1(k) + m[0], j2 = ms.k2(k) + m[1];
      if (!ms.contains(j1, j2)) continue;
      const int j = ms.index(j1, j2);
      defect = std::max(defect, std::abs(raw_entry(j, k) - std::conj(raw_entry(k, j))));
    }

  detail::UnionFind uf(ms.size());
  for (int k = 0; k < static_cast<int>(ms.size()); ++k)
    for (const auto& m : support) {
      const int j1 = ms.k1(k) + m[0], j2 = ms.k2(k) + m[1];
      if (ms.contains(j1, j2)) uf.unite(static_cast<std::size_t>(k), static_cast<std::size_t>(ms.index(j1, j2)));
    }
  const auto comps = uf.components();
  std::size_t largest = 0;
  for (const auto& c : comps) largest = std::max(largest, c.size());

  if (largest <= opts.dense_budget && !opts.force_matrix_free) {
    // Entries outside the support are structural zeros; skip the lookups there.
    auto entry = [&](int j, int k) -> cplx {
      const int m1 = ms.k1(j) - ms.k1(k), m2 = ms.k2(j) - ms.k2(k);
      if (std::abs(m1) > 2 * N || std::abs(m2) > 2 * N) return 0.0;
      return raw_entry(j, k);
    };
    double block_defect = 0.0;
    TruncatedOperator op = blocks_from_components(N, comps, entry, drop_abs, block_defect);
    op.info.symmetrization_defect = defect;
    op.info.route = "separable";
    return op;
  }

  Eigen::VectorXcd diag(ms.size());
  for (int k = 0; k < static_cast<int>(ms.size()); ++k) diag[k] = raw_entry(k, k).real();
  auto apply = [state](const Eigen::VectorXcd& v) -> Eigen::VectorXcd {
    return 0.5 * (state->forward_part(v) + state->adjoint_part(v));
  };
  TruncatedOperator op = TruncatedOperator::make_matrix_free(N, apply, apply, std::move(diag), true);
  op.info.symmetrization_defect = defect;
  op.info.route = "separable-fft";
  return op;
}

TruncatedOperator assemble_generic(const HomogeneousSymbol& sym, int N, const AssemblyOptions& opts) {
  const ModeSet ms(N);
  const std::size_t dim = ms.size();
  if (dim > opts.dense_budget || opts.force_matrix_free)
    throw TooLargeForDense("non-separable symbols are only assembled densely (dimension " + std::to_string(dim) + ")");
  const int L = 4 * N + 1;
  detail::Fft2 fft(L);
  Eigen::MatrixXcd raw(dim, dim);
  std::vector<cplx> grid(static_cast<std::size_t>(L) * L);
  for (int k = 0; k < static_cast<int>(dim); ++k) {
    const int k1 = ms.k1(k), k2 = ms.k2(k);
    const bool origin = k1 == 0 && k2 == 0;
    const double theta = origin ? 0.0 : mode_angle(k1, k2);
    for (int i1 = 0; i1 < L; ++i1)
      for (int i2 = 0; i2 < L; ++i2) {
        const double x1 = kTwoPi * i1 / L, x2 = kTwoPi * i2 / L;
        double v = 0.0;
        if (origin) {
          for (int l = 0; l < kAverageNodes; ++l) v += sym(x1, x2, kTwoPi * l / kAverageNodes);
          v /= kAverageNodes;
        } else {
          v = sym(x1, x2, theta);
        }
        grid[fft.slot(i1, i2)] = v;
      }
    fft.forward(grid);
    for (int j = 0; j < static_cast<int>(dim); ++j) raw(j, k) = grid[fft.slot(ms.k1(j) - k1, ms.k2(j) - k2)];
  }
  const double drop_abs = opts.drop_tol * raw.cwiseAbs().maxCoeff();
  detail::UnionFind uf(dim);
  for (int k = 0; k < static_cast<int>(dim); ++k)
    for (int j = 0; j < static_cast<int>(dim); ++j)
      if (j != k && (std::abs(raw(j, k)) > drop_abs || std::abs(raw(k, j)) > drop_abs))
        uf.unite(static_cast<std::size_t>(j), static_cast<std::size_t>(k));
  const auto comps = uf.components();
  for (const auto& c : comps)
    if (c.size() > opts.dense_budget) throw TooLargeForDense("block exceeds dense budget");
  double defect = 0.0;
  TruncatedOperator op = blocks_from_components(N, comps, [&](int j, int k) { return raw(j, k); }, drop_abs, defect);
  op.info.symmetrization_defect = (raw - raw.adjoint()).cwiseAbs().maxCoeff();
  op.info.route = "generic";
  return op;
}

}  // namespace

TruncatedOperator assemble_P(const HomogeneousSymbol& sym, int N, const AssemblyOptions& opts) {
  if (N < 1) throw std::invalid_argument("assemble_P requires N >= 1");
  TruncatedOperator op =
      sym.separable() && !opts.force_generic ? assemble_separable(sym, N, opts) : assemble_generic(sym, N, opts);
  op.info.symbol = sym.name();
  op.info.params = sym.params();
  return op;
}

TruncatedOperator assemble_Q(int N) {
  const ModeSet ms(N);
  TruncatedOperator op = TruncatedOperator::make_diagonal(N, ms.q_power(1.0).cast<cplx>(), true);
  op.info.symbol = "I - Laplacian";
  op.info.route = "multiplier";
  return op;
}

// ---------------------------------------------------------------------------
// Functional calculus

HermitianEigensystem::HermitianEigensystem(const TruncatedOperator& P, std::size_t budget) : N_(P.N()) {
  if (!P.hermitian()) throw std::invalid_argument("Hermitian eigensystem requested for a non-Hermitian operator");
  switch (P.kind()) {
    case OperatorKind::MatrixFree:
      throw TooLargeForDense("matrix-free operator has no dense eigendecomposition");
    case OperatorKind::Diagonal: {
      const auto& d = P.diagonal();
      blocks_.reserve(d.size());
      for (int i = 0; i < d.size(); ++i)
        blocks_.push_back({{i}, Eigen::VectorXd::Constant(1, d[i].real()), Eigen::MatrixXcd::Ones(1, 1)});
      break;
    }
    case OperatorKind::Dense:
      if (P.max_block_dim() > budget)
        throw TooLargeForDense("block of size " + std::to_string(P.max_block_dim()) + " exceeds budget " +
                               std::to_string(budget));
      for (const auto& b : P.blocks()) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(b.matrix);
        if (es.info() != Eigen::Success) throw std::runtime_error("Hermitian eigensolver failed");
        blocks_.push_back({b.modes, es.eigenvalues(), es.eigenvectors()});
      }
      break;
  }
}

Eigen::VectorXd HermitianEigensystem::eigenvalues() const {
  std::vector<double> all;
  for (const auto& b : blocks_) all.insert(all.end(), b.values.data(), b.values.data() + b.values.size());
  std::sort(all.begin(), all.end());
  return Eigen::Map<Eigen::VectorXd>(all.data(), static_cast<Eigen::Index>(all.size()));
}

Eigen::VectorXcd HermitianEigensystem::apply(const std::function<cplx(double)>& g, const Eigen::VectorXcd& v) const {
  Eigen::VectorXcd out(v.size());
  for (const auto& b : blocks_) {
    Eigen::VectorXcd c = b.vectors.adjoint() * gather(v, b.modes);
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] *= g(b.values[i]);
    scatter(out, b.modes, b.vectors * c);
  }
  return out;
}

TruncatedOperator HermitianEigensystem::function(const std::function<double(double)>& g) const {
  bool scalar = true;
  for (const auto& b : blocks_) scalar = scalar && b.modes.size() == 1;
  if (scalar) {
    Eigen::VectorXcd d(blocks_.size());
    for (const auto& b : blocks_) d[b.modes[0]] = g(b.values[0]);
    return TruncatedOperator::make_diagonal(N_, std::move(d), true);
  }
  std::vector<DenseBlock> out;
  out.reserve(blocks_.size());
  for (const auto& b : blocks_) {
    Eigen::VectorXd gv = b.values.unaryExpr(g);
    Eigen::MatrixXcd m = b.vectors * gv.cast<cplx>().asDiagonal() * b.vectors.adjoint();
    m = 0.5 * (m + m.adjoint()).eval();
    out.push_back({b.modes, std::move(m)});
  }
  return TruncatedOperator::make_dense(N_, std::move(out), true);
}

TruncatedOperator spectral_function(const TruncatedOperator& P, const std::function<double(double)>& g,
                                    std::size_t budget) {
  return HermitianEigensystem(P, budget).function(g);
}

double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / t);
  const double b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

double cutoff_profile(double lambda, double outer, double inner_fraction) {
  const double inner = inner_fraction * outer;
  return 1.0 - smooth_step((std::abs(lambda) - inner) / (outer - inner));
}

SpectralCutoffs spectral_cutoff(const TruncatedOperator& P, double delta, double inner_fraction, std::size_t budget) {
  if (!(inner_fraction > 0.0 && inner_fraction < 1.0)) throw std::invalid_argument("inner_fraction must lie in (0, 1)");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  const HermitianEigensystem es(P, budget);
  auto chi = [=](double l) { return cutoff_profile(l, delta, inner_fraction); };
  auto phi = [=](double l) { return cutoff_profile(l, inner_fraction * delta, inner_fraction); };
  SpectralCutoffs out{es.function(phi), es.function(chi), 0.0};
  for (const auto& b : es.blocks())
    for (Eigen::Index i = 0; i < b.values.size(); ++i)
      out.mismatch = std::max(out.mismatch, std::abs(phi(b.values[i]) * (chi(b.values[i]) - 1.0)));
  if (out.mismatch > 1e-14) throw CutoffMismatch("phi is not supported inside {chi = 1}");
  return out;
}

void export_operator(const TruncatedOperator& A, const std::string& stem) {
  const Eigen::MatrixXcd M = A.to_dense();
  std::ofstream bin(stem + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + stem + ".bin");
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      const double re = M(i, j).real(), im = M(i, j).imag();
      bin.write(reinterpret_cast<const char*>(&re), sizeof re);
      bin.write(reinterpret_cast<const char*>(&im), sizeof im);
    }
  nlohmann::json header = {{"N", A.N()},
                           {"dim", A.dim()},
                           {"kind", to_string(A.kind())},
                           {"hermitian", A.hermitian()},
                           {"symbol", A.info.symbol},
                           {"params", A.info.params},
                           {"route", A.info.route},
                           {"symmetrization_defect", A.info.symmetrization_defect},
                           {"layout", "row-major complex128 (re, im)"},
                           {"mode_order", "k1-major, index = (k1+N)(2N+1) + (k2+N)"}};
  std::ofstream js(stem + ".json");
  if (!js) throw std::runtime_error("cannot write " + stem + ".json");
  js << header.dump(2) << '\n';
}

}  // namespace iwave
