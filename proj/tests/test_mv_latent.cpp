#include <cmath>
#include <random>

#include "doctest.h"

#include "mvcar/errors.hpp"
#include "mvcar/mv_latent.hpp"
#include "support/oracles.hpp"

using namespace mvcar;

namespace {

std::shared_ptr<const LatentModel> make_model(ModelKind kind, int K,
                                              std::shared_ptr<const ArealGraph> g,
                                              LatentOptions o = {}) {
  return std::make_shared<const LatentModel>(kind, K, std::move(g), o);
}

NaturalParams natural_of(const test::NaturalDraw& d, ModelKind kind) {
  NaturalParams p;
  p.variances = d.variances;
  p.correlations = d.correlations;
  p.alpha = d.alpha;
  if (kind == ModelKind::MModel) p.M = d.M;
  return p;
}

// Wishart_K(n, S) log density written out from the definition.
double wishart_oracle(const Eigen::MatrixXd& X, double n, const Eigen::MatrixXd& S) {
  const double K = static_cast<double>(X.rows());
  double log_gamma_k = K * (K - 1.0) / 4.0 * std::log(M_PI);
  for (int j = 1; j <= X.rows(); ++j) log_gamma_k += std::lgamma(n / 2.0 + (1.0 - j) / 2.0);
  return (n - K - 1.0) / 2.0 * std::log(X.determinant()) -
         0.5 * (S.inverse() * X).trace() - n * K / 2.0 * std::log(2.0) -
         n / 2.0 * std::log(S.determinant()) - log_gamma_k;
}

}  // namespace

TEST_SUITE("mv_latent") {

TEST_CASE("hyperparameter counts") {
  CHECK(theta_dim(ModelKind::IMCAR, 3) == 6);
  CHECK(theta_dim(ModelKind::PMCAR, 2) == 4);
  CHECK(theta_dim(ModelKind::PMCAR, 3) == 7);
  CHECK(theta_dim(ModelKind::MModel, 3) == 12);
  CHECK(theta_dim(ModelKind::IndepIMCAR, 4) == 4);
  CHECK(theta_dim(ModelKind::IndepPMCAR, 4) == 5);
  for (ModelKind kind : kAllModelKinds)
    for (int K = 1; K <= 4; ++K) {
      CHECK(static_cast<int>(internal_names(kind, K).size()) == theta_dim(kind, K));
      CHECK(static_cast<int>(natural_names(kind, K).size()) == theta_dim(kind, K));
    }
}

TEST_CASE("model names round-trip") {
  for (ModelKind kind : kAllModelKinds) CHECK(parse_model_kind(model_name(kind)) == kind);
  CHECK(parse_model_kind("PMCAR") == ModelKind::PMCAR);
  CHECK_THROWS_AS(parse_model_kind("leroux"), ValidationError);
}

TEST_CASE("internal to natural: midpoints") {
  const auto g = test::path_graph(4);
  const auto m = make_model(ModelKind::PMCAR, 2, g);
  const NaturalParams p = to_natural(*m, HyperVector(Eigen::VectorXd::Zero(4)));
  CHECK(p.alpha[0] == doctest::Approx(0.5));
  CHECK(p.correlations(1, 0) == 0.0);
  CHECK(p.variances[0] == 1.0);
  CHECK(p.variances[1] == 1.0);
}

TEST_CASE("natural to internal") {
  const auto g = test::path_graph(4);
  const auto m = make_model(ModelKind::PMCAR, 2, g);
  NaturalParams p;
  p.variances = Eigen::Vector2d(1, 1);
  p.correlations = Eigen::Matrix2d::Identity();
  p.alpha = Eigen::VectorXd::Constant(1, 0.5);
  CHECK(from_natural(*m, p).values().isZero(0.0));

  p.correlations(0, 1) = p.correlations(1, 0) = 0.6;
  CHECK(from_natural(*m, p)[3] == doctest::Approx(std::log(4.0)).epsilon(1e-14));

  p.variances[0] = -1.0;
  CHECK_THROWS_AS(from_natural(*m, p), DomainError);
  p.variances[0] = 1.0;
  p.alpha[0] = 1.2;
  CHECK_THROWS_AS(from_natural(*m, p), DomainError);
}

TEST_CASE("round trip through the internal scale") {
  std::mt19937_64 rng(77);
  const auto g = test::random_connected_graph(5, 2, rng);
  for (ModelKind kind : kAllModelKinds)
    for (int K = 1; K <= 3; ++K) {
      const auto m = make_model(kind, K, g);
      for (int rep = 0; rep < 50; ++rep) {
        const test::NaturalDraw d = test::random_natural(kind, K, m->alpha_range(), rng);
        const NaturalParams p = natural_of(d, kind);
        const NaturalParams back = to_natural(*m, from_natural(*m, p));
        CHECK((natural_vector(*m, back) - natural_vector(*m, p)).lpNorm<Eigen::Infinity>() < 1e-12);
      }
    }
}

TEST_CASE("between-variable covariance") {
  const auto g = test::path_graph(4);
  std::mt19937_64 rng(1);
  const auto pm = make_model(ModelKind::PMCAR, 3, g);
  const test::NaturalDraw d = test::random_natural(ModelKind::PMCAR, 3, pm->alpha_range(), rng);
  const NaturalParams p = to_natural(*pm, test::theta_from_draw(ModelKind::PMCAR, 3, pm->alpha_range(), d));
  CHECK((p.between_cov - test::covariance_from_draw(d)).lpNorm<Eigen::Infinity>() < 1e-12);

  const auto mm = make_model(ModelKind::MModel, 3, g);
  const test::NaturalDraw dm = test::random_natural(ModelKind::MModel, 3, mm->alpha_range(), rng);
  const NaturalParams pmm =
      to_natural(*mm, test::theta_from_draw(ModelKind::MModel, 3, mm->alpha_range(), dm));
  CHECK((pmm.between_cov - dm.M.transpose() * dm.M).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("precision: independent intrinsic is block diagonal") {
  const auto g = test::path_graph(3);
  const auto m = make_model(ModelKind::IndepIMCAR, 2, g);
  const Eigen::MatrixXd Q = precision(*m, HyperVector(Eigen::VectorXd::Zero(2))).to_dense();
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(6, 6);
  expected.block(0, 0, 3, 3) = test::dense_car(*g, 1.0);
  expected.block(3, 3, 3, 3) = test::dense_car(*g, 1.0);
  CHECK(Q == expected);
}

TEST_CASE("precision: IMCAR with rho = 0 equals IndepIMCAR exactly") {
  std::mt19937_64 rng(2);
  const auto g = test::random_connected_graph(6, 3, rng);
  const auto indep = make_model(ModelKind::IndepIMCAR, 3, g);
  const auto full = make_model(ModelKind::IMCAR, 3, g);
  Eigen::VectorXd t(6);
  t << 0.3, -1.2, 2.0, 0, 0, 0;
  const Eigen::MatrixXd a = precision(*indep, HyperVector(t.head(3))).to_dense();
  const Eigen::MatrixXd b = precision(*full, HyperVector(t)).to_dense();
  CHECK(a == b);
}

TEST_CASE("precision: dense inversion oracle") {
  std::mt19937_64 rng(3);
  const auto g = test::random_connected_graph(4, 2, rng);
  for (int rep = 0; rep < 5; ++rep) {
    const auto pm = make_model(ModelKind::PMCAR, 2, g);
    const test::NaturalDraw d = test::random_natural(ModelKind::PMCAR, 2, pm->alpha_range(), rng);
    const HyperVector t = test::theta_from_draw(ModelKind::PMCAR, 2, pm->alpha_range(), d);
    const Eigen::MatrixXd cov = precision(*pm, t).to_dense().inverse();
    const Eigen::MatrixXd oracle =
        test::dense_kron(test::covariance_from_draw(d), test::dense_car(*g, d.alpha[0]).inverse());
    CHECK((cov - oracle).lpNorm<Eigen::Infinity>() < 1e-9);

    const auto mm = make_model(ModelKind::MModel, 2, g);
    const test::NaturalDraw dm = test::random_natural(ModelKind::MModel, 2, mm->alpha_range(), rng);
    const HyperVector tm = test::theta_from_draw(ModelKind::MModel, 2, mm->alpha_range(), dm);
    const Eigen::MatrixXd covm = precision(*mm, tm).to_dense().inverse();
    const Eigen::MatrixXd oraclem = test::dense_precision(ModelKind::MModel, *g, dm).inverse();
    CHECK((covm - oraclem).lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("precision: singular M is rejected") {
  const auto g = test::path_graph(3);
  const auto m = make_model(ModelKind::MModel, 2, g);
  Eigen::VectorXd t(6);
  t << 0, 0, 1, 2, 2, 4;  // columns (1, 2) and (2, 4)
  CHECK_THROWS_AS(precision(*m, HyperVector(t)), InvalidHyperparameters);
}

TEST_CASE("log prior") {
  const auto g = test::path_graph(4);
  SUBCASE("uniform on sigma") {
    const auto m = make_model(ModelKind::IndepIMCAR, 2, g);
    const Eigen::Vector2d a(0.4, -1.3), b(2.0, 0.7);
    const double diff = log_prior(*m, HyperVector(a)) - log_prior(*m, HyperVector(b));
    CHECK(diff == doctest::Approx(-(a[0] - b[0]) / 2 - (a[1] - b[1]) / 2).epsilon(1e-14));
  }
  SUBCASE("Wishart density at the identity") {
    for (int K = 1; K <= 4; ++K) {
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(K, K);
      CHECK(wishart_log_density(I, K, I) == doctest::Approx(wishart_oracle(I, K, I)).epsilon(1e-13));
    }
    CHECK(wishart_log_density(Eigen::Matrix2d::Identity(), 2, Eigen::Matrix2d::Identity()) ==
          doctest::Approx(-1.0 - 2.0 * std::log(2.0) - std::log(M_PI)).epsilon(1e-13));
    std::mt19937_64 rng(5);
    const Eigen::MatrixXd X = test::random_correlation(3, rng) * 2.0;
    const Eigen::MatrixXd S = test::random_correlation(3, rng);
    CHECK(wishart_log_density(X, 4.5, S) == doctest::Approx(wishart_oracle(X, 4.5, S)).epsilon(1e-12));
  }
  SUBCASE("alpha term is symmetric about alpha* = 0") {
    const auto m = make_model(ModelKind::IndepPMCAR, 1, g);
    for (double a : {0.3, 1.7, 4.0}) {
      CHECK(log_prior(*m, HyperVector(Eigen::Vector2d(a, 0.5))) ==
            doctest::Approx(log_prior(*m, HyperVector(Eigen::Vector2d(-a, 0.5)))).epsilon(1e-14));
    }
  }
  SUBCASE("PMCAR prior: Wishart at Lambda^-1 plus a numerical Jacobian") {
    const auto m = make_model(ModelKind::PMCAR, 2, g);
    Eigen::VectorXd t(4);
    t << 0.2, 0.5, -0.3, 0.8;
    const NaturalParams p = to_natural(*m, HyperVector(t));
    // Jacobian of (log tau_1, log tau_2, rho*) -> (s11, s21, s22) in closed form.
    const double v1 = std::exp(-t[1]), v2 = std::exp(-t[2]), rho = std::tanh(t[3] / 2);
    const double drho = 0.5 * (1 - rho * rho);
    Eigen::Matrix3d J;
    J << -v1, 0, 0, -0.5 * rho * std::sqrt(v1 * v2), -0.5 * rho * std::sqrt(v1 * v2),
        std::sqrt(v1 * v2) * drho, 0, -v2, 0;
    // log expit(a) + log(1 - expit(a)) = -a - 2 log(1 + e^-a)
    const double alpha_term = -0.2 - 2.0 * std::log1p(std::exp(-0.2));
    const double expected = alpha_term + wishart_oracle(*p.lambda_inv, 2, Eigen::Matrix2d::Identity()) +
                            std::log(std::abs(J.determinant()));
    CHECK(log_prior(*m, HyperVector(t)) == doctest::Approx(expected).epsilon(1e-7));
  }
  SUBCASE("M-model prior equals iid normal loadings") {
    const auto m = make_model(ModelKind::MModel, 2, g);
    Eigen::VectorXd a(6), b(6);
    a << 0.1, -0.4, 1.0, 0.3, -0.2, 2.0;
    b << 0.1, -0.4, -0.5, 1.1, 0.7, 0.4;
    const double tau = m->mmodel_tau();
    const double expected =
        -0.5 * tau * (a.tail(4).squaredNorm() - b.tail(4).squaredNorm());
    CHECK(log_prior(*m, HyperVector(a)) - log_prior(*m, HyperVector(b)) ==
          doctest::Approx(expected).epsilon(1e-12));

    LatentOptions raw;
    raw.mmodel_jacobian = false;
    const auto m2 = make_model(ModelKind::MModel, 2, g, raw);
    const Eigen::Matrix2d Ma = Eigen::Map<const Eigen::Matrix2d>(a.tail(4).data());
    const Eigen::Matrix2d Mb = Eigen::Map<const Eigen::Matrix2d>(b.tail(4).data());
    const Eigen::Matrix2d S = Eigen::Matrix2d::Identity() / tau;
    CHECK(log_prior(*m2, HyperVector(a)) - log_prior(*m2, HyperVector(b)) ==
          doctest::Approx(wishart_oracle(Ma.transpose() * Ma, 2, S) -
                          wishart_oracle(Mb.transpose() * Mb, 2, S))
              .epsilon(1e-12));
  }
}

TEST_CASE("constraints") {
  SUBCASE("K = 2 on a connected path") {
    const auto m = make_model(ModelKind::IMCAR, 2, test::path_graph(3));
    const auto c = constraints(*m);
    REQUIRE(c);
    Eigen::MatrixXd A(2, 6);
    A << 1, 1, 1, 0, 0, 0, 0, 0, 0, 1, 1, 1;
    CHECK(c->A == A);
    CHECK(c->e.isZero(0.0));
  }
  SUBCASE("proper kinds have none") {
    CHECK_FALSE(constraints(*make_model(ModelKind::PMCAR, 2, test::path_graph(3))));
    CHECK_FALSE(constraints(*make_model(ModelKind::MModel, 2, test::path_graph(3))));
  }
  SUBCASE("one row per component") {
    const auto g = test::make_graph(5, {{1, 2}, {3, 4}, {4, 5}});
    const auto c = constraints(*make_model(ModelKind::IndepIMCAR, 1, g));
    REQUIRE(c);
    Eigen::MatrixXd A(2, 5);
    A << 1, 1, 0, 0, 0, 0, 0, 1, 1, 1;
    CHECK(c->A == A);
  }
}

TEST_CASE("effect sampling") {
  SUBCASE("intrinsic draws sum to zero per variable and component") {
    const auto g = test::make_graph(6, {{1, 2}, {2, 3}, {4, 5}, {5, 6}});
    const auto m = make_model(ModelKind::IMCAR, 2, g);
    Eigen::VectorXd t(3);
    t << 0.5, -0.5, 1.0;
    const EffectSampler sampler(*m, HyperVector(t));
    Rng rng(3);
    for (int s = 0; s < 100; ++s) {
      const Eigen::MatrixXd th = sampler.draw(rng);
      for (int k = 0; k < 2; ++k) {
        CHECK(std::abs(th.col(k).head(3).sum()) < 1e-10);
        CHECK(std::abs(th.col(k).tail(3).sum()) < 1e-10);
      }
    }
  }
  SUBCASE("PMCAR covariance") {
    const auto g = test::cycle_graph(4);
    const auto m = make_model(ModelKind::PMCAR, 2, g);
    test::NaturalDraw d;
    d.variances = Eigen::Vector2d(1.0, 2.0);
    d.correlations = Eigen::Matrix2d::Identity();
    d.correlations(0, 1) = d.correlations(1, 0) = 0.6;
    d.alpha = Eigen::VectorXd::Constant(1, 0.7);
    const EffectSampler sampler(*m, test::theta_from_draw(ModelKind::PMCAR, 2, m->alpha_range(), d));
    Rng rng(4);
    const int n = 200000;
    Eigen::MatrixXd draws(8, n);
    for (int s = 0; s < n; ++s) draws.col(s) = sampler.draw_vec(rng);
    const Eigen::MatrixXd oracle =
        test::dense_kron(test::covariance_from_draw(d), test::dense_car(*g, 0.7).inverse());
    CHECK(test::rel_frobenius(test::sample_covariance(draws), oracle) < 0.05);
  }
  SUBCASE("M-model with M = I has independent variables") {
    const auto g = test::cycle_graph(5);
    const auto m = make_model(ModelKind::MModel, 2, g);
    Eigen::VectorXd t(6);
    t << 0.3, -0.3, 1, 0, 0, 1;
    const EffectSampler sampler(*m, HyperVector(t));
    Rng rng(5);
    const int n = 100000;
    Eigen::MatrixXd draws(10, n);
    for (int s = 0; s < n; ++s) draws.col(s) = sampler.draw_vec(rng);
    const Eigen::MatrixXd cov = test::sample_covariance(draws);
    const double cross = cov.block(0, 5, 5, 5).cwiseAbs().maxCoeff();
    const double own = cov.block(0, 0, 5, 5).diagonal().minCoeff();
    // Standard error of a covariance estimate is about sd_a sd_b / sqrt(n).
    CHECK(cross < 5.0 * own / std::sqrt(static_cast<double>(n)) * 3.0);
  }
}

}
