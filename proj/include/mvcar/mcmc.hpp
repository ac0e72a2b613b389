#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mvcar/ensemble.hpp"
#include "mvcar/laplace.hpp"

namespace mvcar {

struct McmcOptions {
  int iterations = 50000;  // per chain, burn-in included
  int burnin = 10000;
  int chains = 2;
  std::uint64_t seed = 1;
  double target_accept = 0.234;
  int threads = 1;
  /// Accumulate DIC and WAIC from the retained latent draws (needs Poisson
  /// count data).
  bool criteria = true;
};

struct McmcChain {
  /// Retained theta samples, one row per post-burn-in iteration.
  Eigen::MatrixXd samples;
  double acceptance = 0.0;  // post-burn-in
  double final_scale = 0.0;
};

struct McmcResult {
  std::vector<McmcChain> chains;
  /// Pooled over chains.
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  std::optional<Criteria> criteria;
};

/// Metropolis-Hastings on (theta, x) jointly. A proposal moves theta by a
/// Gaussian random walk with covariance scale^2 * proposal_cov and draws x
/// from the Gaussian approximation at the proposed theta; the acceptance
/// ratio corrects exactly for that approximation, so the chain targets
/// pi(theta, x | y). The scale follows a Robbins-Monro recursion towards
/// the target acceptance during burn-in and is frozen afterwards. Chains
/// use independent seeds and run in parallel.
McmcResult mcmc_fit(const LaplaceProblem& problem, const HyperVector& theta_init,
                    const Eigen::MatrixXd& proposal_cov, const McmcOptions& options,
                    const CountData* data = nullptr);

}  // namespace mvcar
