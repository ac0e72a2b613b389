#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <memory>
#include <optional>
#include <random>
#include <vector>

namespace mvcar {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Rng = std::mt19937_64;

/// Sparse symmetric matrix. Both triangles are stored; the constructor
/// rejects non-square, empty, non-finite or asymmetric input.
class SparseSym {
 public:
  explicit SparseSym(SparseMatrix m);

  /// Duplicate triplets are summed. Only the given entries are stored, so the
  /// caller must supply both (i,j) and (j,i).
  static SparseSym from_triplets(int dim, const std::vector<Triplet>& triplets);
  static SparseSym identity(int dim);
  static SparseSym diagonal(const Eigen::VectorXd& d);

  int dim() const noexcept { return static_cast<int>(m_.rows()); }
  const SparseMatrix& matrix() const noexcept { return m_; }
  double coeff(int i, int j) const { return m_.coeff(i, j); }
  Eigen::MatrixXd to_dense() const { return Eigen::MatrixXd(m_); }
  Eigen::VectorXd diagonal_values() const { return m_.diagonal(); }

  /// x^T Q x
  double quadratic_form(const Eigen::VectorXd& x) const;

 private:
  SparseMatrix m_;
};

/// Block (k,l) of the result equals L(k,l) * S, variable-major ordering:
/// rows k*I .. (k+1)*I-1 belong to block k. Exact-zero blocks are not stored.
SparseSym kron_dense_sparse(const Eigen::MatrixXd& L, const SparseSym& S);

/// Diagonal jitter retry schedule: delta * mean(diag Q) is added with delta
/// running start, start*factor, ... up to max.
struct JitterPolicy {
  bool enabled = false;
  double start = 1e-8;
  double max = 1e-4;
  double factor = 10.0;

  static JitterPolicy none() { return {}; }
  static JitterPolicy standard() { return {true, 1e-8, 1e-4, 10.0}; }
};

/// Sparse Cholesky factor P Q P^T = L L^T with a fill-reducing (AMD)
/// ordering. Immutable and cheap to copy (shared state).
class CholFactor {
 public:
  int dim() const noexcept { return dim_; }
  double log_det() const noexcept { return log_det_; }
  /// Relative delta used; 0 when Q factored as given.
  double jitter_applied() const noexcept { return jitter_; }
  /// Absolute amount added to each diagonal entry.
  double jitter_absolute() const noexcept { return jitter_abs_; }

  /// perm[i] = row of Q that becomes row i of P Q P^T.
  Eigen::VectorXi permutation() const;
  SparseMatrix lower() const;

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;

  /// Maps a standard normal vector z to x with Cov(x) = Q^{-1}.
  Eigen::VectorXd whiten_inverse(const Eigen::VectorXd& z) const;

 private:
  friend CholFactor cholesky(const SparseSym& q, const JitterPolicy& policy);
  using Solver = Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

  std::shared_ptr<const Solver> solver_;
  int dim_ = 0;
  double log_det_ = 0.0;
  double jitter_ = 0.0;
  double jitter_abs_ = 0.0;
};

/// Throws NotPositiveDefinite when Q is not numerically PD and jitter is
/// disabled or exhausted.
CholFactor cholesky(const SparseSym& q, const JitterPolicy& policy = JitterPolicy::none());

Eigen::VectorXd solve(const CholFactor& f, const Eigen::VectorXd& b);
Eigen::MatrixXd solve(const CholFactor& f, const Eigen::MatrixXd& b);

/// Linear constraints A x = e. Rows of A must be linearly independent and
/// fewer than the columns.
struct ConstraintSet {
  Eigen::MatrixXd A;
  Eigen::VectorXd e;

  ConstraintSet(Eigen::MatrixXd a, Eigen::VectorXd rhs);
  int rows() const noexcept { return static_cast<int>(A.rows()); }
  int cols() const noexcept { return static_cast<int>(A.cols()); }
};

/// Conditioning by kriging against a fixed factorization. Caches
/// W = Q^{-1} A^T and the Cholesky factor of A Q^{-1} A^T so that many
/// vectors can be corrected cheaply.
class KrigingCorrector {
 public:
  KrigingCorrector(const CholFactor& f, const ConstraintSet& c);

  /// x - Q^{-1} A^T (A Q^{-1} A^T)^{-1} (A x - e)
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  /// Same correction with e = 0, for directions (Newton steps).
  Eigen::VectorXd apply_homogeneous(const Eigen::VectorXd& x) const;

  /// log det(A Q^{-1} A^T)
  double log_det_aqa() const noexcept { return log_det_aqa_; }
  const Eigen::MatrixXd& q_inv_at() const noexcept { return q_inv_at_; }
  /// (A Q^{-1} A^T)^{-1} v
  Eigen::VectorXd solve_aqa(const Eigen::VectorXd& v) const { return aqa_.solve(v); }

 private:
  ConstraintSet c_;
  Eigen::MatrixXd q_inv_at_;
  Eigen::LLT<Eigen::MatrixXd> aqa_;
  double log_det_aqa_ = 0.0;
};

Eigen::VectorXd constrain(const Eigen::VectorXd& x, const CholFactor& f, const ConstraintSet& c);

/// Draw from N(0, Q^{-1}), optionally conditioned on A x = e by kriging.
Eigen::VectorXd sample_gmrf(const CholFactor& f, const ConstraintSet* c, Rng& rng);

/// Fills a vector with independent standard normals.
Eigen::VectorXd standard_normal(Eigen::Index n, Rng& rng);

}  // namespace mvcar
