#include "mvcar/sparse_symmetric.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mvcar/errors.hpp"

namespace mvcar {

SparseSym::SparseSym(SparseMatrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) throw ValidationError("sparse symmetric matrix must be square");
  if (m_.rows() < 1) throw ValidationError("sparse symmetric matrix must have dimension >= 1");
  m_.makeCompressed();
  for (int k = 0; k < m_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m_, k); it; ++it)
      if (!std::isfinite(it.value())) throw ValidationError("sparse matrix has non-finite entries");
  const SparseMatrix t = m_.transpose();
  if (SparseMatrix(t - m_).norm() != 0.0)
    throw ValidationError("sparse matrix is not symmetric");
}

SparseSym SparseSym::from_triplets(int dim, const std::vector<Triplet>& triplets) {
  SparseMatrix m(dim, dim);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return SparseSym(std::move(m));
}

SparseSym SparseSym::identity(int dim) {
  SparseMatrix m(dim, dim);
  m.setIdentity();
  return SparseSym(std::move(m));
}

SparseSym SparseSym::diagonal(const Eigen::VectorXd& d) {
  std::vector<Triplet> t;
  t.reserve(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) t.emplace_back(i, i, d[i]);
  return from_triplets(static_cast<int>(d.size()), t);
}

double SparseSym::quadratic_form(const Eigen::VectorXd& x) const { return x.dot(m_ * x); }

SparseSym kron_dense_sparse(const Eigen::MatrixXd& L, const SparseSym& S) {
  const Eigen::Index K = L.rows();
  if (L.cols() != K || K < 1) throw ValidationError("Kronecker factor must be square");
  if (L != L.transpose()) throw ValidationError("Kronecker factor must be symmetric");
  const Eigen::Index I = S.dim();
  if (static_cast<long long>(I) * K > std::numeric_limits<int>::max())
    throw ValidationError("Kronecker product dimension overflows");

  const SparseMatrix& s = S.matrix();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(s.nonZeros() * K * K));
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index l = 0; l < K; ++l) {
      const double lkl = L(k, l);
      if (lkl == 0.0) continue;
      for (int c = 0; c < s.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(s, c); it; ++it)
          t.emplace_back(k * I + it.row(), l * I + it.col(), lkl * it.value());
    }
  }
  return SparseSym::from_triplets(static_cast<int>(I * K), t);
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kRelativePivotFloor = 1e-12;

bool factor_ok(const Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>& s,
               double scale) {
  if (s.info() != Eigen::Success) return false;
  const SparseMatrix L = s.matrixL();
  const Eigen::VectorXd d = L.diagonal();
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (!(d[i] * d[i] > kRelativePivotFloor * scale) || !std::isfinite(d[i])) return false;
  return true;
}

}  // namespace

CholFactor cholesky(const SparseSym& q, const JitterPolicy& policy) {
  const SparseMatrix& m = q.matrix();
  const Eigen::VectorXd diag = m.diagonal();
  const double scale = diag.cwiseAbs().maxCoeff();
  const double mean_diag = diag.mean();

  auto attempt = [&](double absolute) {
    auto solver = std::make_shared<CholFactor::Solver>();
    if (absolute == 0.0) {
      solver->compute(m);
    } else {
      SparseMatrix shifted = m;
      for (Eigen::Index i = 0; i < shifted.rows(); ++i) shifted.coeffRef(i, i) += absolute;
      solver->compute(shifted);
    }
    return solver;
  };

  CholFactor f;
  f.dim_ = q.dim();
  auto solver = attempt(0.0);
  if (!(scale > 0.0) || !factor_ok(*solver, scale)) {
    if (!policy.enabled || !(mean_diag > 0.0))
      throw NotPositiveDefinite("matrix is not positive definite");
    bool ok = false;
    for (double delta = policy.start; delta <= policy.max * (1.0 + 1e-12); delta *= policy.factor) {
      solver = attempt(delta * mean_diag);
      if (factor_ok(*solver, scale)) {
        f.jitter_ = delta;
        f.jitter_abs_ = delta * mean_diag;
        ok = true;
        break;
      }
    }
    if (!ok) throw NotPositiveDefinite("matrix is not positive definite after maximal jitter");
  }
  const SparseMatrix L = solver->matrixL();
  f.log_det_ = 2.0 * L.diagonal().array().log().sum();
  f.solver_ = std::move(solver);
  return f;
}

Eigen::VectorXi CholFactor::permutation() const { return solver_->permutationP().indices(); }

SparseMatrix CholFactor::lower() const { return solver_->matrixL(); }

Eigen::VectorXd CholFactor::solve(const Eigen::VectorXd& b) const {
  if (b.size() != dim_) throw ValidationError("solve: dimension mismatch");
  return solver_->solve(b);
}

Eigen::MatrixXd CholFactor::solve(const Eigen::MatrixXd& b) const {
  if (b.rows() != dim_) throw ValidationError("solve: dimension mismatch");
  return solver_->solve(b);
}

Eigen::VectorXd CholFactor::whiten_inverse(const Eigen::VectorXd& z) const {
  if (z.size() != dim_) throw ValidationError("whiten_inverse: dimension mismatch");
  const Eigen::VectorXd y = solver_->matrixU().solve(z);
  return solver_->permutationPinv() * y;
}

Eigen::VectorXd solve(const CholFactor& f, const Eigen::VectorXd& b) { return f.solve(b); }
Eigen::MatrixXd solve(const CholFactor& f, const Eigen::MatrixXd& b) { return f.solve(b); }

// ---------------------------------------------------------------------------

ConstraintSet::ConstraintSet(Eigen::MatrixXd a, Eigen::VectorXd rhs)
    : A(std::move(a)), e(std::move(rhs)) {
  if (A.rows() < 1) throw ValidationError("constraint set needs at least one row");
  if (e.size() != A.rows()) throw ValidationError("constraint rhs length does not match A");
  if (A.rows() >= A.cols()) throw ValidationError("constraint set must have fewer rows than columns");
  if (!A.allFinite() || !e.allFinite()) throw ValidationError("constraint set has non-finite values");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A.transpose());
  if (qr.rank() != A.rows()) throw ValidationError("constraint rows are linearly dependent");
}

KrigingCorrector::KrigingCorrector(const CholFactor& f, const ConstraintSet& c) : c_(c) {
  if (c.cols() != f.dim()) throw ValidationError("constraint width does not match factor dimension");
  q_inv_at_ = f.solve(Eigen::MatrixXd(c.A.transpose()));
  Eigen::MatrixXd aqa = c.A * q_inv_at_;
  aqa = 0.5 * (aqa + aqa.transpose()).eval();
  aqa_.compute(aqa);
  if (aqa_.info() != Eigen::Success) throw ConstraintDegeneracy("A Q^-1 A^T is singular");
  const Eigen::VectorXd d = aqa_.matrixL().toDenseMatrix().diagonal();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (!(d.minCoeff() > 1e-10 * dmax)) throw ConstraintDegeneracy("A Q^-1 A^T is singular");
  log_det_aqa_ = 2.0 * d.array().log().sum();
}

Eigen::VectorXd KrigingCorrector::apply(const Eigen::VectorXd& x) const {
  return x - q_inv_at_ * aqa_.solve(c_.A * x - c_.e);
}

Eigen::VectorXd KrigingCorrector::apply_homogeneous(const Eigen::VectorXd& x) const {
  return x - q_inv_at_ * aqa_.solve(c_.A * x);
}

Eigen::VectorXd constrain(const Eigen::VectorXd& x, const CholFactor& f, const ConstraintSet& c) {
  if (x.size() != f.dim()) throw ValidationError("constrain: dimension mismatch");
  return KrigingCorrector(f, c).apply(x);
}

Eigen::VectorXd standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
  return z;
}

Eigen::VectorXd sample_gmrf(const CholFactor& f, const ConstraintSet* c, Rng& rng) {
  Eigen::VectorXd x = f.whiten_inverse(standard_normal(f.dim(), rng));
  if (c != nullptr) x = KrigingCorrector(f, *c).apply(x);
  return x;
}

}  // namespace mvcar
