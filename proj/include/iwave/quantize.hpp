#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "iwave/modes.hpp"
#include "iwave/symbol.hpp"

namespace iwave {

/// Largest matrix block that cubic-cost routines accept.
inline constexpr std::size_t kDenseBudget = 5000;

enum class OperatorKind { Dense, Diagonal, MatrixFree };

const char* to_string(OperatorKind kind);

/// Square block acting on a subset of modes (global indices).
struct DenseBlock {
  std::vector<int> modes;
  Eigen::MatrixXcd matrix;
};

struct OperatorInfo {
  std::string symbol;
  std::map<std::string, double> params;
  std::string route;
  /// max |A - A^*| of the quantized matrix before symmetrization.
  double symmetrization_defect = 0.0;
};

/// Linear operator on the mode set |k|_inf <= N. Dense operators are stored as
/// a block-diagonal decomposition over a partition of the modes, so operators
/// that couple few modes stay cheap at large N. Copies share storage.
class TruncatedOperator {
 public:
  using ApplyFn = std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>;

  TruncatedOperator() = default;

  static TruncatedOperator make_diagonal(int N, Eigen::VectorXcd entries, bool hermitian);
  /// Blocks must be disjoint; uncovered modes get zero 1x1 blocks.
  static TruncatedOperator make_dense(int N, std::vector<DenseBlock> blocks, bool hermitian);
  static TruncatedOperator make_dense(int N, const Eigen::MatrixXcd& full, bool hermitian);
  static TruncatedOperator make_matrix_free(int N, ApplyFn apply, ApplyFn adjoint,
                                            Eigen::VectorXcd diagonal_part, bool hermitian);
  static TruncatedOperator identity(int N);

  int N() const { return N_; }
  std::size_t dim() const { return ModeSet(N_).size(); }
  OperatorKind kind() const { return kind_; }
  bool hermitian() const { return hermitian_; }
  bool is_matrix_free() const { return kind_ == OperatorKind::MatrixFree; }

  const std::vector<DenseBlock>& blocks() const;
  /// Entries for Diagonal kind, the diagonal part otherwise.
  const Eigen::VectorXcd& diagonal() const { return *diag_; }
  std::size_t max_block_dim() const;

  Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const;
  Eigen::VectorXcd apply_adjoint(const Eigen::VectorXcd& v) const;
  SpectralField apply(const SpectralField& u) const;

  /// Full matrix; refuses dimensions above max_dim.
  Eigen::MatrixXcd to_dense(std::size_t max_dim = kDenseBudget) const;

  OperatorInfo info;

 private:
  int N_ = 0;
  OperatorKind kind_ = OperatorKind::Diagonal;
  bool hermitian_ = true;
  std::shared_ptr<const std::vector<DenseBlock>> blocks_;
  std::shared_ptr<const Eigen::VectorXcd> diag_;
  ApplyFn apply_;
  ApplyFn adjoint_;
};

struct AssemblyOptions {
  std::size_t dense_budget = kDenseBudget;
  /// Per-column FFT of p(., theta_k) even when a separable form exists.
  bool force_generic = false;
  bool force_matrix_free = false;
  /// Entries below drop_tol * max|entry| are treated as structural zeros.
  double drop_tol = 1e-14;
};

/// Kohn-Nirenberg quantization of a degree-0 symbol, symmetrized (A + A^*)/2.
/// Column k couples to row j through the (j-k)-th Fourier coefficient of
/// x -> p(x, k/|k|); column 0 uses the theta-average of p.
TruncatedOperator assemble_P(const HomogeneousSymbol& sym, int N, const AssemblyOptions& opts = {});

/// Q = I - Laplacian, diagonal with entries 1 + |k|^2.
TruncatedOperator assemble_Q(int N);

/// Per-block Hermitian eigendecomposition of a dense or diagonal operator.
class HermitianEigensystem {
 public:
  struct Block {
    std::vector<int> modes;
    Eigen::VectorXd values;
    Eigen::MatrixXcd vectors;
  };

  explicit HermitianEigensystem(const TruncatedOperator& P, std::size_t budget = kDenseBudget);

  int N() const { return N_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  Eigen::VectorXd eigenvalues() const;
  Eigen::VectorXcd apply(const std::function<cplx(double)>& g, const Eigen::VectorXcd& v) const;
  TruncatedOperator function(const std::function<double(double)>& g) const;

 private:
  int N_;
  std::vector<Block> blocks_;
};

/// U g(Lambda) U^* for Hermitian P. Throws TooLargeForDense above budget.
TruncatedOperator spectral_function(const TruncatedOperator& P, const std::function<double(double)>& g,
                                    std::size_t budget = kDenseBudget);

/// Exponential-type smoothstep: 0 for t <= 0, 1 for t >= 1, C-infinity.
double smooth_step(double t);

/// Even bump equal to 1 on [-inner_fraction*outer, inner_fraction*outer] and
/// vanishing outside (-outer, outer).
double cutoff_profile(double lambda, double outer, double inner_fraction);

struct SpectralCutoffs {
  TruncatedOperator phi;
  TruncatedOperator chi;
  /// max over eigenvalues of |phi (chi - 1)|.
  double mismatch = 0.0;
};

/// chi has outer radius delta; phi has outer radius inner_fraction*delta, so
/// supp phi lies in {chi = 1}. Throws CutoffMismatch if the nesting fails.
SpectralCutoffs spectral_cutoff(const TruncatedOperator& P, double delta, double inner_fraction,
                                std::size_t budget = kDenseBudget);

/// Writes <stem>.bin (row-major complex doubles) and <stem>.json.
void export_operator(const TruncatedOperator& A, const std::string& stem);

}  // namespace iwave
