#include "mvcar/car_precision.hpp"

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "mvcar/errors.hpp"

namespace mvcar {

void require_no_isolated(const ArealGraph& g) {
  for (int i = 0; i < g.n_regions(); ++i)
    if (g.neighbors()[i].empty())
      throw ValidationError("region " + std::to_string(i + 1) +
                            " has no neighbours; CAR models need n_i >= 1");
}

namespace {

SparseSym car_matrix(const ArealGraph& g, double alpha) {
  std::vector<Triplet> t;
  t.reserve(g.n_regions() + 2 * g.n_edges());
  for (int i = 0; i < g.n_regions(); ++i)
    t.emplace_back(i, i, static_cast<double>(g.neighbors()[i].size()));
  if (alpha != 0.0) {
    for (const auto& e : g.edges()) {
      t.emplace_back(e.a, e.b, -alpha);
      t.emplace_back(e.b, e.a, -alpha);
    }
  }
  return SparseSym::from_triplets(g.n_regions(), t);
}

struct Extremes {
  double min = 0.0;
  double max = 0.0;
};

// Lanczos on B = D^{-1/2} W D^{-1/2} with full reorthogonalization. Restarts
// from the Ritz vector of the slower end when the basis reaches its cap.
Extremes lanczos_extremes(const ArealGraph& g) {
  const int n = g.n_regions();
  Eigen::VectorXd inv_sqrt_deg(n);
  for (int i = 0; i < n; ++i)
    inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(g.neighbors()[i].size()));

  auto apply = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j : g.neighbors()[i]) s += inv_sqrt_deg[j] * v[j];
      out[i] = inv_sqrt_deg[i] * s;
    }
    return out;
  };

  if (n <= 2) {
    // Path-2 (the only connected graph this small): eigenvalues +-1.
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) dense.col(i) = apply(Eigen::VectorXd::Unit(n, i));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense, Eigen::EigenvaluesOnly);
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
  }

  constexpr double kTol = 1e-10;
  const int max_basis = std::min(n, 300);

  Rng rng(20190531);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::VectorXd start(n);
  for (int i = 0; i < n; ++i) start[i] = unif(rng);

  Extremes result;
  Eigen::VectorXd restart_min = start, restart_max = start;
  bool min_done = false, max_done = false;

  for (int restart = 0; restart < 100 && !(min_done && max_done); ++restart) {
    Eigen::VectorXd v0 = restart == 0 ? start : (!min_done ? restart_min : restart_max);
    v0.normalize();

    Eigen::MatrixXd V(n, max_basis);
    std::vector<double> alpha, beta;
    V.col(0) = v0;
    int m = 0;
    bool invariant = false;
    for (int j = 0; j < max_basis; ++j) {
      Eigen::VectorXd w = apply(V.col(j));
      const double a = V.col(j).dot(w);
      alpha.push_back(a);
      // Two passes of classical Gram-Schmidt against the whole basis.
      for (int pass = 0; pass < 2; ++pass)
        w -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * w);
      const double b = w.norm();
      m = j + 1;
      if (b < 1e-13 || j + 1 == max_basis) {
        invariant = b < 1e-13;
        beta.push_back(b);
        break;
      }
      beta.push_back(b);
      V.col(j + 1) = w / b;
    }

    Eigen::VectorXd diag(m), sub(std::max(m - 1, 0));
    for (int i = 0; i < m; ++i) diag[i] = alpha[i];
    for (int i = 0; i + 1 < m; ++i) sub[i] = beta[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    const double last_beta = invariant ? 0.0 : beta.back();

    const double res_min = std::abs(last_beta * es.eigenvectors()(m - 1, 0));
    const double res_max = std::abs(last_beta * es.eigenvectors()(m - 1, m - 1));
    if (!min_done) {
      result.min = es.eigenvalues()[0];
      min_done = res_min < kTol;
    }
    if (!max_done) {
      result.max = es.eigenvalues()[m - 1];
      max_done = res_max < kTol;
    }
    restart_min = V.leftCols(m) * es.eigenvectors().col(0);
    restart_max = V.leftCols(m) * es.eigenvectors().col(m - 1);
  }
  if (!(min_done && max_done))
    throw InvalidState("Lanczos did not converge for the autocorrelation bounds");
  return result;
}

}  // namespace

SparseSym intrinsic_precision(const ArealGraph& g) {
  require_no_isolated(g);
  return car_matrix(g, 1.0);
}

SparseSym proper_precision(const ArealGraph& g, double alpha, const AlphaBounds& bounds) {
  require_no_isolated(g);
  if (!std::isfinite(alpha) || !bounds.contains(alpha, 1e-12))
    throw DomainError("alpha = " + std::to_string(alpha) + " outside admissible interval [" +
                      std::to_string(bounds.lower) + ", " + std::to_string(bounds.upper) + "]");
  return car_matrix(g, alpha);
}

SparseSym proper_precision(const ArealGraph& g, double alpha) {
  require_no_isolated(g);
  return proper_precision(g, alpha, alpha_bounds(g));
}

AlphaBounds alpha_bounds(const ArealGraph& g) {
  require_no_isolated(g);
  const Extremes ext = lanczos_extremes(g);
  return {1.0 / ext.min, 1.0 / ext.max};
}

double intrinsic_log_pdet(const ArealGraph& g) {
  require_no_isolated(g);
  const Components comps = connected_components(g);
  std::vector<std::vector<int>> members(comps.count);
  for (int i = 0; i < g.n_regions(); ++i) members[comps.labels[i] - 1].push_back(i);

  double total = 0.0;
  for (const auto& nodes : members) {
    const int nc = static_cast<int>(nodes.size());
    total += std::log(static_cast<double>(nc));
    if (nc == 1) continue;
    // Drop the last node of the component.
    std::vector<int> local(g.n_regions(), -1);
    for (int k = 0; k + 1 < nc; ++k) local[nodes[k]] = k;
    std::vector<Triplet> t;
    for (int k = 0; k + 1 < nc; ++k) {
      const int i = nodes[k];
      t.emplace_back(k, k, static_cast<double>(g.neighbors()[i].size()));
      for (int j : g.neighbors()[i])
        if (local[j] >= 0) t.emplace_back(k, local[j], -1.0);
    }
    total += cholesky(SparseSym::from_triplets(nc - 1, t)).log_det();
  }
  return total;
}

}  // namespace mvcar
