#pragma once

// Dense brute-force constructions and random instances shared by the unit
// tests and the acceptance runner. Everything here is built from the
// definitions with dense Eigen algebra and never calls the sparse code paths
// it is compared against.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "mvcar/areal_graph.hpp"
#include "mvcar/mv_latent.hpp"

namespace mvcar::test {

using EdgeList = std::vector<std::pair<int, int>>;

inline std::shared_ptr<const ArealGraph> make_graph(int n, const EdgeList& edges) {
  return std::make_shared<const ArealGraph>(n, std::span<const std::pair<int, int>>(edges));
}

inline std::shared_ptr<const ArealGraph> path_graph(int n) {
  EdgeList e;
  for (int i = 1; i < n; ++i) e.emplace_back(i, i + 1);
  return make_graph(n, e);
}

inline std::shared_ptr<const ArealGraph> cycle_graph(int n) {
  EdgeList e;
  for (int i = 1; i < n; ++i) e.emplace_back(i, i + 1);
  e.emplace_back(n, 1);
  return make_graph(n, e);
}

inline std::shared_ptr<const ArealGraph> star_graph(int n) {
  EdgeList e;
  for (int i = 2; i <= n; ++i) e.emplace_back(1, i);
  return make_graph(n, e);
}

// Random spanning tree plus `extra` random chords: connected, no isolated
// regions for n >= 2.
inline EdgeList random_connected_edges(int n, int extra, std::mt19937_64& rng) {
  EdgeList e;
  for (int i = 2; i <= n; ++i) {
    std::uniform_int_distribution<int> parent(1, i - 1);
    e.emplace_back(parent(rng), i);
  }
  std::uniform_int_distribution<int> node(1, n);
  for (int t = 0; t < extra; ++t) {
    const int a = node(rng), b = node(rng);
    if (a != b) e.emplace_back(a, b);
  }
  return e;
}

inline std::shared_ptr<const ArealGraph> random_connected_graph(int n, int extra,
                                                                std::mt19937_64& rng) {
  return make_graph(n, random_connected_edges(n, extra, rng));
}

// Arbitrary graph (possibly disconnected, possibly with isolated nodes).
inline EdgeList random_edges(int n, double p, std::mt19937_64& rng) {
  EdgeList e;
  std::bernoulli_distribution coin(p);
  for (int a = 1; a <= n; ++a)
    for (int b = a + 1; b <= n; ++b)
      if (coin(rng)) e.emplace_back(a, b);
  return e;
}

struct SpatialGraph {
  std::shared_ptr<const ArealGraph> graph;
  std::vector<Eigen::Vector2d> points;
};

// "Planar-ish" lattice: uniform points in the unit square joined to their k
// nearest neighbours (symmetrized), then components joined through their
// closest pair of points until the graph is connected.
inline SpatialGraph knn_graph(int n, int k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Eigen::Vector2d> pts(n);
  for (auto& p : pts) p = Eigen::Vector2d(u(rng), u(rng));

  std::set<std::pair<int, int>> edges;
  auto add = [&](int a, int b) { edges.insert({std::min(a, b), std::max(a, b)}); };
  for (int i = 0; i < n; ++i) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return (pts[a] - pts[i]).squaredNorm() < (pts[b] - pts[i]).squaredNorm();
    });
    for (int j = 1; j <= k && j < n; ++j) add(i, order[j]);
  }

  for (;;) {
    std::vector<int> comp(n, -1);
    int n_comp = 0;
    std::vector<std::vector<int>> adj(n);
    for (auto [a, b] : edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    for (int s = 0; s < n; ++s) {
      if (comp[s] >= 0) continue;
      std::vector<int> stack{s};
      comp[s] = n_comp;
      while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int w : adj[v])
          if (comp[w] < 0) {
            comp[w] = n_comp;
            stack.push_back(w);
          }
      }
      ++n_comp;
    }
    if (n_comp == 1) break;
    double best = 1e300;
    std::pair<int, int> link{0, 0};
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (comp[a] == 0 && comp[b] != 0) {
          const double d = (pts[a] - pts[b]).squaredNorm();
          if (d < best) {
            best = d;
            link = {a, b};
          }
        }
    add(link.first, link.second);
  }

  EdgeList e;
  for (auto [a, b] : edges) e.emplace_back(a + 1, b + 1);
  return {make_graph(n, e), pts};
}

// ---------------------------------------------------------------------------
// Dense structural matrices

inline Eigen::MatrixXd dense_adjacency(const ArealGraph& g) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(g.n_regions(), g.n_regions());
  for (const Edge& e : g.edges()) W(e.a, e.b) = W(e.b, e.a) = 1.0;
  return W;
}

inline Eigen::MatrixXd dense_car(const ArealGraph& g, double alpha) {
  const Eigen::MatrixXd W = dense_adjacency(g);
  Eigen::MatrixXd Q = -alpha * W;
  Q.diagonal() += W.rowwise().sum();
  return Q;
}

inline Eigen::MatrixXd dense_kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd out(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return out;
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Natural parameters of one random valid instance.
struct NaturalDraw {
  Eigen::VectorXd variances;
  Eigen::MatrixXd correlations;
  Eigen::VectorXd alpha;  // empty, size 1 or size K
  Eigen::MatrixXd M;      // MModel only
};

inline Eigen::MatrixXd random_correlation(int K, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  // Normalized Gram matrix of random vectors, well away from singularity.
  Eigen::MatrixXd B(K, K + 2);
  for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = z(rng);
  Eigen::MatrixXd S = B * B.transpose();
  const Eigen::VectorXd d = S.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd C = d.asDiagonal() * S * d.asDiagonal();
  for (int j = 0; j < K; ++j) {
    C(j, j) = 1.0;
    for (int i = j + 1; i < K; ++i) C(j, i) = C(i, j);
  }
  return C;
}

inline NaturalDraw random_natural(ModelKind kind, int K, const AlphaRange& range,
                                  std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  NaturalDraw d;
  d.variances = Eigen::VectorXd(K);
  for (int k = 0; k < K; ++k) d.variances[k] = 0.3 + 2.7 * u(rng);
  d.correlations = has_correlations(kind) ? random_correlation(K, rng)
                                          : Eigen::MatrixXd::Identity(K, K);
  const int na = alpha_count(kind, K);
  d.alpha = Eigen::VectorXd(na);
  for (int a = 0; a < na; ++a)
    d.alpha[a] = range.min + (range.max - range.min) * (0.05 + 0.9 * u(rng));
  if (kind == ModelKind::MModel) {
    std::normal_distribution<double> z;
    do {
      d.M = Eigen::MatrixXd(K, K);
      for (Eigen::Index i = 0; i < d.M.size(); ++i) d.M.data()[i] = z(rng);
    } while (std::abs(d.M.determinant()) < 0.2);
  }
  return d;
}

// Internal-scale vector assembled by hand from the documented layout.
inline HyperVector theta_from_draw(ModelKind kind, int K, const AlphaRange& range,
                                   const NaturalDraw& d) {
  std::vector<double> t;
  auto logit = [](double p) { return std::log(p / (1.0 - p)); };
  for (Eigen::Index a = 0; a < d.alpha.size(); ++a)
    t.push_back(logit((d.alpha[a] - range.min) / (range.max - range.min)));
  if (kind == ModelKind::MModel) {
    for (int j = 0; j < K; ++j)
      for (int i = 0; i < K; ++i) t.push_back(d.M(i, j));
  } else {
    for (int k = 0; k < K; ++k) t.push_back(-std::log(d.variances[k]));
    if (has_correlations(kind))
      for (int j = 0; j < K; ++j)
        for (int i = j + 1; i < K; ++i) t.push_back(logit((d.correlations(i, j) + 1.0) / 2.0));
  }
  return HyperVector(Eigen::Map<Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size())));
}

inline Eigen::MatrixXd covariance_from_draw(const NaturalDraw& d) {
  const Eigen::VectorXd s = d.variances.cwiseSqrt();
  return s.asDiagonal() * d.correlations * s.asDiagonal();
}

// Brute-force precision of vec(Theta), variable-major.
inline Eigen::MatrixXd dense_precision(ModelKind kind, const ArealGraph& g, const NaturalDraw& d) {
  const int I = g.n_regions();
  const int K = static_cast<int>(d.variances.size() > 0 ? d.variances.size() : d.M.rows());
  if (kind == ModelKind::MModel) {
    Eigen::MatrixXd blocks = Eigen::MatrixXd::Zero(K * I, K * I);
    for (int k = 0; k < K; ++k) blocks.block(k * I, k * I, I, I) = dense_car(g, d.alpha[k]).inverse();
    const Eigen::MatrixXd MI = dense_kron(d.M, Eigen::MatrixXd::Identity(I, I));
    const Eigen::MatrixXd cov = MI.transpose() * blocks * MI;
    return cov.inverse();
  }
  const Eigen::MatrixXd lambda = covariance_from_draw(d).inverse();
  const double alpha = d.alpha.size() ? d.alpha[0] : 1.0;
  return dense_kron(lambda, dense_car(g, alpha));
}

// Sum of log eigenvalues above a relative threshold (generalized determinant
// for singular matrices).
inline double dense_log_pdet(const Eigen::MatrixXd& Q, double rel_tol = 1e-9) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Q + Q.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues();
  const double cut = rel_tol * ev.cwiseAbs().maxCoeff();
  double s = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] > cut) s += std::log(ev[i]);
  return s;
}

inline Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& Q, double rel_tol = 1e-9) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Q + Q.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues();
  const double cut = rel_tol * ev.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] > cut) inv[i] = 1.0 / ev[i];
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& draws) {
  // draws: one sample per column
  const Eigen::VectorXd mean = draws.rowwise().mean();
  const Eigen::MatrixXd c = draws.colwise() - mean;
  return c * c.transpose() / static_cast<double>(draws.cols() - 1);
}

inline double rel_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& ref) {
  return (a - ref).norm() / ref.norm();
}

}  // namespace mvcar::test
