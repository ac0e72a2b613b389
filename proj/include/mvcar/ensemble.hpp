#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mvcar/hyper_optimizer.hpp"
#include "mvcar/laplace.hpp"
#include "mvcar/likelihood_model.hpp"

namespace mvcar {

enum class ExploreMode { ModeOnly, Axis };

std::string_view explore_name(ExploreMode mode);
/// "mode-only" or "axis".
ExploreMode parse_explore_mode(std::string_view name);

/// Weighted set of hyperparameter points with their Laplace evaluations.
struct Ensemble {
  std::vector<LaplaceEval> evals;
  Eigen::VectorXd weights;

  int size() const noexcept { return static_cast<int>(evals.size()); }
};

/// Softmax of the log-posterior values; -inf entries get weight 0. Throws
/// InvalidState when every entry is -inf.
Eigen::VectorXd ensemble_weights(const std::vector<double>& log_post);

/// theta_mode followed by theta_mode + delta v_j / sqrt(lambda_j) and
/// theta_mode - delta v_j / sqrt(lambda_j) for each eigenpair of H (in
/// ascending eigenvalue order): 2p + 1 points.
std::vector<HyperVector> axis_points(const HyperVector& mode, const Eigen::MatrixXd& hessian,
                                     double delta = 1.0);

/// Evaluates the design points (with predictor moments) in parallel and
/// weights them. The mode evaluation is reused.
Ensemble explore_ensemble(const LaplaceProblem& problem, const HyperMode& mode, ExploreMode explore,
                          double delta = 1.0, int threads = 1);

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
};

/// Weighted mean, sd and quantiles of a discrete distribution. Quantiles are
/// taken from the weighted empirical CDF (lower quantile convention).
ParamSummary weighted_summary(std::string name, const Eigen::VectorXd& values,
                              const Eigen::VectorXd& weights);

struct HyperSummary {
  std::vector<ParamSummary> internal;
  std::vector<ParamSummary> natural;
  Eigen::MatrixXd between_cov_mean;
};

/// Internal summaries weight the theta components; natural summaries
/// transform every point first and then weight. Rejected points (weight 0)
/// are skipped.
HyperSummary summarize_hyper(const Ensemble& ensemble, const LatentModel& model);
HyperSummary summarize_hyper(const std::vector<HyperVector>& thetas, const Eigen::VectorXd& weights,
                             ModelKind kind, int n_variables, const AlphaRange& range);

/// Weighted mixture of univariate Gaussians.
struct GaussianMixture {
  Eigen::VectorXd weights;
  Eigen::VectorXd means;
  Eigen::VectorXd sds;

  double mean() const;
  double variance() const;
};

/// n stratified draws u_s = (s + U_s) / n mapped through the mixture (the
/// component is picked by u_s, the position inside it by the rescaled u_s).
/// The stream is seeded from (seed, stream) only.
Eigen::VectorXd mixture_draws(const GaussianMixture& mixture, int n, std::uint64_t seed,
                              std::uint64_t stream);

/// The posterior of linear-predictor entry `cell` as a mixture over the
/// ensemble.
GaussianMixture predictor_mixture(const Ensemble& ensemble, int cell);

/// Relative risks R_ik = exp(eta_ik - log E_ik), I x K each.
struct LatentSummary {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd sd;
  Eigen::MatrixXd q025;
  Eigen::MatrixXd q50;
  Eigen::MatrixXd q975;
};

/// Means and sds from log-normal moments of each component; quantiles from
/// `n_draws` deterministic draws per cell.
LatentSummary summarize_latent(const Ensemble& ensemble, const Design& design, int n_regions,
                               int n_variables, int n_draws = 10000, std::uint64_t seed = 42);

/// Posterior of every fixed effect as a mixture over the ensemble.
std::vector<ParamSummary> summarize_fixed(const Ensemble& ensemble,
                                          const std::vector<std::string>& names, int n_latent,
                                          int n_draws = 10000, std::uint64_t seed = 42);

struct Criterion {
  double value = 0.0;
  double p_eff = 0.0;
};

struct Criteria {
  /// Saturated-reference deviance: DIC = 2 E[D] - D(E[eta]).
  Criterion dic;
  /// Same with the full deviance -2 log p(y | eta) (differs by a constant).
  double dic_full = 0.0;
  double mean_deviance = 0.0;
  /// WAIC = -2 sum_i (lppd_i - p_i) with the full Poisson log pmf.
  Criterion waic;
};

Criteria information_criteria(const Ensemble& ensemble, const CountData& data, int n_draws = 10000,
                              std::uint64_t seed = 42);
Criterion dic(const Ensemble& ensemble, const CountData& data, int n_draws = 10000,
              std::uint64_t seed = 42);
Criterion waic(const Ensemble& ensemble, const CountData& data, int n_draws = 10000,
               std::uint64_t seed = 42);

}  // namespace mvcar
