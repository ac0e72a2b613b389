#include <cmath>
#include <random>

#include "doctest.h"

#include "mvcar/errors.hpp"
#include "mvcar/likelihood_model.hpp"

using namespace mvcar;

namespace {

CountData small_data(int I, int K, std::mt19937_64& rng, int n_cov = 0) {
  std::uniform_int_distribution<int> count(0, 20);
  std::uniform_real_distribution<double> u(0.5, 10.0);
  CountData d;
  d.observed.resize(I, K);
  d.expected.resize(I, K);
  for (int k = 0; k < K; ++k) {
    d.variable_labels.push_back("v" + std::to_string(k + 1));
    for (int i = 0; i < I; ++i) {
      d.observed(i, k) = count(rng);
      d.expected(i, k) = u(rng);
    }
  }
  for (int c = 0; c < n_cov; ++c) {
    d.covariate_names.push_back("x" + std::to_string(c + 1));
    Eigen::MatrixXd x(I, K);
    for (Eigen::Index j = 0; j < x.size(); ++j) x.data()[j] = u(rng) - 5.0;
    d.covariates.push_back(x);
  }
  return d;
}

}  // namespace

TEST_SUITE("likelihood_model") {

TEST_CASE("internal standardization") {
  Eigen::MatrixXd O(2, 1), N(2, 1);
  O << 1, 3;
  N << 10, 30;
  const Eigen::MatrixXd E = expected_counts(O, N);
  CHECK(E(0, 0) == doctest::Approx(1.0));
  CHECK(E(1, 0) == doctest::Approx(3.0));
  CHECK(expected_counts(O, O) == O);

  std::mt19937_64 rng(1);
  const CountData d = small_data(7, 3, rng);
  const Eigen::MatrixXd E2 = expected_counts(d.observed, d.expected);
  for (int k = 0; k < 3; ++k)
    CHECK(E2.col(k).sum() == doctest::Approx(d.observed.col(k).sum()).epsilon(1e-13));
}

TEST_CASE("standardized mortality ratio") {
  Eigen::MatrixXd O(1, 3), E(1, 3);
  O << 2, 0, 5;
  E << 2, 4, 2;
  const Eigen::MatrixXd s = smr(O, E);
  CHECK(s(0, 0) == 1.0);
  CHECK(s(0, 1) == 0.0);
  CHECK(s(0, 2) == 2.5);
  std::mt19937_64 rng(2);
  const CountData d = small_data(5, 2, rng);
  CHECK(smr(d.observed, d.expected) == d.observed.cwiseQuotient(d.expected));
}

TEST_CASE("Poisson terms") {
  CountData d;
  d.observed = Eigen::MatrixXd(2, 1);
  d.observed << 4, 0;
  d.expected = Eigen::MatrixXd::Ones(2, 1);
  SUBCASE("saturated point has zero gradient") {
    const LikelihoodTerms t = poisson_loglik_terms(d, Eigen::Vector2d(std::log(4.0), -50.0));
    CHECK(std::abs(t.grad[0]) < 1e-14);
  }
  SUBCASE("y = 0, eta = 0") {
    const LikelihoodTerms t = poisson_loglik_terms(d, Eigen::Vector2d(0.0, 0.0));
    CHECK(t.grad[1] == -1.0);
    CHECK(t.curvature[1] == 1.0);
  }
  SUBCASE("finite-difference check") {
    std::mt19937_64 rng(3);
    const CountData r = small_data(6, 2, rng);
    std::normal_distribution<double> z;
    Eigen::VectorXd eta(12);
    for (int i = 0; i < 12; ++i) eta[i] = z(rng);
    const LikelihoodTerms t = poisson_loglik_terms(r, eta);
    const double h = 1e-5;
    for (int i = 0; i < 12; ++i) {
      Eigen::VectorXd up = eta, dn = eta;
      up[i] += h;
      dn[i] -= h;
      const LikelihoodTerms tu = poisson_loglik_terms(r, up), td = poisson_loglik_terms(r, dn);
      const double g = (tu.loglik - td.loglik) / (2 * h);
      const double c = -(tu.grad[i] - td.grad[i]) / (2 * h);
      CHECK(std::abs(g - t.grad[i]) <= 1e-6 * std::max(1.0, std::abs(t.grad[i])));
      CHECK(std::abs(c - t.curvature[i]) <= 1e-6 * std::max(1.0, std::abs(t.curvature[i])));
    }
  }
  SUBCASE("divergent predictor") {
    CHECK_THROWS_AS(poisson_loglik_terms(d, Eigen::Vector2d(31.0, 0.0)), InvalidState);
  }
  SUBCASE("absent cells contribute nothing") {
    CountData m = d;
    m.observed(1, 0) = std::nan("");
    const LikelihoodTerms t = poisson_loglik_terms(m, Eigen::Vector2d(0.3, 100.0));
    CHECK(t.loglik == doctest::Approx(4 * 0.3 - std::exp(0.3)));
    CHECK(t.grad[1] == 0.0);
    CHECK(t.curvature[1] == 0.0);
  }
}

TEST_CASE("per-cell pmf and deviance") {
  CHECK(poisson_log_pmf(3, std::log(2.0)) ==
        doctest::Approx(3 * std::log(2.0) - 2.0 - std::log(6.0)).epsilon(1e-14));
  CHECK(poisson_deviance(5, std::log(5.0)) == doctest::Approx(0.0));
  CHECK(poisson_deviance(0, std::log(2.0)) == doctest::Approx(4.0));
}

TEST_CASE("design") {
  SUBCASE("no covariates, zero effects gives log E") {
    std::mt19937_64 rng(4);
    const CountData d = small_data(4, 2, rng);
    const Design des = build_design(d);
    CHECK(des.n_latent() == 8);
    CHECK(des.n_fixed() == 2);
    const Eigen::VectorXd eta = des.apply(Eigen::VectorXd::Zero(10));
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 4; ++i) CHECK(eta[k * 4 + i] == std::log(d.expected(i, k)));
  }
  SUBCASE("a coefficient only reaches its own variable") {
    std::mt19937_64 rng(5);
    const CountData d = small_data(3, 2, rng, 1);
    const Design des = build_design(d);
    CHECK(des.n_fixed() == 4);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(des.n_augmented());
    x[6 + 2] = 1.0;  // beta_{1,1}
    const Eigen::VectorXd delta = des.apply(x) - des.offset();
    for (int i = 0; i < 3; ++i) {
      CHECK(delta[i] == d.covariates[0](i, 0));
      CHECK(delta[3 + i] == 0.0);
    }
    const std::vector<std::string> names = fixed_effect_names(d);
    CHECK(names == std::vector<std::string>{"intercept_v1", "intercept_v2", "x1_v1", "x1_v2"});
  }
  SUBCASE("dense matrix-product oracle") {
    std::mt19937_64 rng(6);
    const CountData d = small_data(5, 3, rng, 2);
    const Design des = build_design(d);
    const int I = 5, K = 3;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(I * K, I * K + K + 2 * K);
    for (int k = 0; k < K; ++k)
      for (int i = 0; i < I; ++i) {
        const int r = k * I + i;
        A(r, r) = 1.0;
        A(r, I * K + k) = 1.0;
        for (int c = 0; c < 2; ++c) A(r, I * K + K + c * K + k) = d.covariates[c](i, k);
      }
    CHECK(Eigen::MatrixXd(des.matrix()) == A);
    std::normal_distribution<double> z;
    Eigen::VectorXd x(A.cols()), y(A.rows());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = z(rng);
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = z(rng);
    CHECK((des.apply(x) - des.offset() - A * x).lpNorm<Eigen::Infinity>() < 1e-14);
    CHECK((des.apply_transpose(y) - A.transpose() * y).lpNorm<Eigen::Infinity>() < 1e-14);
  }
}

TEST_CASE("validation") {
  std::mt19937_64 rng(7);
  CountData d = small_data(3, 2, rng);
  CHECK_NOTHROW(d.validate());
  d.observed(0, 0) = 1.5;
  CHECK_THROWS_AS(d.validate(), ValidationError);
  d.observed(0, 0) = -1;
  CHECK_THROWS_AS(d.validate(), ValidationError);
  d.observed(0, 0) = 1;
  d.expected(1, 1) = 0.0;
  CHECK_THROWS_AS(d.validate(), ValidationError);
}

TEST_CASE("Gaussian pseudo-likelihood") {
  const GaussianPseudoLikelihood g(Eigen::Vector2d(1.0, -2.0), Eigen::Vector2d(2.0, 0.5));
  const LikelihoodTerms t = g.terms(Eigen::Vector2d(0.0, 0.0));
  CHECK(t.loglik == doctest::Approx(-0.5 * (2.0 * 1.0 + 0.5 * 4.0)));
  CHECK(t.grad[0] == 2.0);
  CHECK(t.grad[1] == -1.0);
  CHECK(t.curvature == Eigen::VectorXd(Eigen::Vector2d(2.0, 0.5)));
}

}
