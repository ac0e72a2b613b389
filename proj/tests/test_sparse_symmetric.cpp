#include <random>

#include "doctest.h"

#include "mvcar/car_precision.hpp"
#include "mvcar/errors.hpp"
#include "mvcar/sparse_symmetric.hpp"
#include "support/oracles.hpp"

using namespace mvcar;

namespace {

Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd B(n, n);
  for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = z(rng);
  Eigen::MatrixXd S = B * B.transpose();
  S.diagonal().array() += n;
  return 0.5 * (S + S.transpose());
}

SparseSym to_sparse(const Eigen::MatrixXd& d) { return SparseSym(d.sparseView()); }

}  // namespace

TEST_SUITE("sparse_symmetric") {

TEST_CASE("construction rejects bad matrices") {
  Eigen::MatrixXd a(2, 2);
  a << 1, 2, 3, 1;
  CHECK_THROWS_AS(to_sparse(a), ValidationError);
  CHECK_THROWS_AS(SparseSym(SparseMatrix(2, 3)), ValidationError);
  Eigen::MatrixXd nan = Eigen::MatrixXd::Identity(2, 2);
  nan(0, 0) = std::nan("");
  CHECK_THROWS_AS(to_sparse(nan), ValidationError);
}

TEST_CASE("kronecker: identity factor gives block diagonal copies") {
  const SparseSym S = intrinsic_precision(*test::path_graph(3));
  const Eigen::MatrixXd out = kron_dense_sparse(Eigen::MatrixXd::Identity(2, 2), S).to_dense();
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(6, 6);
  expected.block(0, 0, 3, 3) = S.to_dense();
  expected.block(3, 3, 3, 3) = S.to_dense();
  CHECK(out == expected);
}

TEST_CASE("kronecker: scalar structure") {
  Eigen::MatrixXd L(2, 2);
  L << 2, 1, 1, 2;
  Eigen::MatrixXd s(1, 1);
  s << 3;
  Eigen::MatrixXd expected(2, 2);
  expected << 6, 3, 3, 6;
  CHECK(kron_dense_sparse(L, to_sparse(s)).to_dense() == expected);
}

TEST_CASE("kronecker: random factors equal the dense product exactly") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::MatrixXd L = random_spd(3, rng);
    const auto g = test::random_connected_graph(5, 3, rng);
    const SparseSym S = proper_precision(*g, 0.4);
    CHECK(kron_dense_sparse(L, S).to_dense() == test::dense_kron(L, S.to_dense()));
  }
}

TEST_CASE("log determinant") {
  CHECK(cholesky(SparseSym::identity(4)).log_det() == doctest::Approx(0.0));
  CHECK(cholesky(SparseSym::diagonal(Eigen::Vector2d(2, 8))).log_det() ==
        doctest::Approx(std::log(16.0)).epsilon(1e-14));

  const SparseSym Q = proper_precision(*test::path_graph(3), 0.5);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q.to_dense());
  CHECK(std::abs(cholesky(Q).log_det() - es.eigenvalues().array().log().sum()) < 1e-10);
}

TEST_CASE("solve") {
  const Eigen::Vector3d b(1, -2, 5);
  CHECK((cholesky(SparseSym::identity(3)).solve(Eigen::VectorXd(b)) - b).norm() < 1e-15);
  const Eigen::VectorXd x =
      cholesky(SparseSym::diagonal(Eigen::Vector2d(2, 4))).solve(Eigen::VectorXd(Eigen::Vector2d(2, 4)));
  CHECK((x - Eigen::Vector2d(1, 1)).norm() < 1e-15);

  std::mt19937_64 rng(5);
  const Eigen::MatrixXd A = random_spd(6, rng);
  Eigen::VectorXd rhs(6);
  rhs << 1, 2, 3, 4, 5, 6;
  const Eigen::VectorXd oracle = A.llt().solve(rhs);
  CHECK((cholesky(to_sparse(A)).solve(rhs) - oracle).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("factorization failure and jitter") {
  const SparseSym Q = intrinsic_precision(*test::path_graph(3));
  CHECK_THROWS_AS(cholesky(Q), NotPositiveDefinite);
  const CholFactor f = cholesky(Q, JitterPolicy::standard());
  CHECK(f.jitter_applied() > 0.0);
  CHECK(f.jitter_absolute() > 0.0);
}

TEST_CASE("conditioning by kriging") {
  SUBCASE("already feasible vector is unchanged") {
    const CholFactor f = cholesky(SparseSym::identity(3));
    const ConstraintSet c(Eigen::RowVector3d(1, 1, 1), Eigen::VectorXd::Zero(1));
    const Eigen::VectorXd x = Eigen::Vector3d(1, -3, 2);
    CHECK((constrain(x, f, c) - x).norm() < 1e-15);
  }
  SUBCASE("orthogonal projection") {
    const CholFactor f = cholesky(SparseSym::identity(2));
    const ConstraintSet c(Eigen::RowVector2d(1, 1), Eigen::VectorXd::Zero(1));
    const Eigen::VectorXd x = constrain(Eigen::Vector2d(3, 1), f, c);
    CHECK((x - Eigen::Vector2d(1, -1)).norm() < 1e-15);
  }
  SUBCASE("random 8-dimensional case against the dense formula") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> z;
    const Eigen::MatrixXd Q = random_spd(8, rng);
    Eigen::MatrixXd A(2, 8);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = z(rng);
    const Eigen::Vector2d e(0.5, -1.0);
    Eigen::VectorXd x(8);
    for (int i = 0; i < 8; ++i) x[i] = z(rng);
    const Eigen::MatrixXd S = Q.inverse();
    const Eigen::VectorXd oracle =
        x - S * A.transpose() * (A * S * A.transpose()).inverse() * (A * x - e);
    const Eigen::VectorXd got = constrain(x, cholesky(to_sparse(Q)), ConstraintSet(A, e));
    CHECK((got - oracle).lpNorm<Eigen::Infinity>() < 1e-9);
  }
  SUBCASE("dependent constraint rows are rejected") {
    Eigen::MatrixXd A(2, 3);
    A << 1, 1, 1, 2, 2, 2;
    CHECK_THROWS_AS(ConstraintSet(A, Eigen::VectorXd::Zero(2)), ValidationError);
  }
}

TEST_CASE("GMRF sampling: identity covariance") {
  const CholFactor f = cholesky(SparseSym::identity(2));
  Rng rng(101);
  const int n = 100000;
  Eigen::MatrixXd draws(2, n);
  for (int s = 0; s < n; ++s) draws.col(s) = sample_gmrf(f, nullptr, rng);
  const Eigen::MatrixXd cov = test::sample_covariance(draws);
  CHECK(std::abs(cov(0, 0) - 1.0) < 0.05);
  CHECK(std::abs(cov(1, 1) - 1.0) < 0.05);
  CHECK(std::abs(cov(0, 1)) < 0.05);
}

TEST_CASE("GMRF sampling: sum-to-zero intrinsic path-3") {
  const SparseSym Q = intrinsic_precision(*test::path_graph(3));
  const CholFactor f = cholesky(Q, JitterPolicy::standard());
  const ConstraintSet c(Eigen::RowVector3d(1, 1, 1), Eigen::VectorXd::Zero(1));
  Rng rng(202);
  const int n = 200000;
  Eigen::MatrixXd draws(3, n);
  double worst = 0.0;
  for (int s = 0; s < n; ++s) {
    draws.col(s) = sample_gmrf(f, &c, rng);
    worst = std::max(worst, std::abs(draws.col(s).sum()));
  }
  CHECK(worst < 1e-10);
  const Eigen::MatrixXd oracle = test::pseudo_inverse(Q.to_dense());
  CHECK(test::rel_frobenius(test::sample_covariance(draws), oracle) < 0.05);
}

}
