#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mvcar/ensemble.hpp"
#include "mvcar/hyper_optimizer.hpp"
#include "mvcar/laplace.hpp"
#include "mvcar/likelihood_model.hpp"
#include "mvcar/mcmc.hpp"
#include "mvcar/mv_latent.hpp"

namespace mvcar {

struct FitOptions {
  ExploreMode explore = ExploreMode::Axis;
  double axis_delta = 1.0;
  double hessian_step = 0.005;
  std::uint64_t seed = 42;
  /// Draws per cell for quantiles, DIC and WAIC.
  int n_draws = 10000;
  int threads = 1;
  double fixed_precision = 0.001;
  std::optional<HyperVector> theta_init;
  std::optional<McmcOptions> mcmc;
};

struct FitResult {
  ModelKind kind = ModelKind::IndepIMCAR;
  int n_regions = 0;
  int n_variables = 0;
  AlphaRange alpha_range{};
  std::optional<AlphaBounds> admissible;
  std::vector<std::string> variable_labels;
  std::vector<std::string> covariate_names;
  std::vector<std::string> internal_names;
  std::vector<std::string> natural_names;
  FitOptions options;

  HyperVector theta_init;
  HyperMode mode;
  Ensemble ensemble;
  HyperSummary hyper;
  std::vector<ParamSummary> fixed;
  LatentSummary fitted;
  Criteria criteria;
  std::optional<McmcResult> mcmc;
  std::vector<std::pair<std::string, double>> timings;  // seconds
};

/// Zeros, except that log-precisions of intrinsic kinds start at 1 and the
/// M-model loading matrix starts at the identity (M = 0 is singular).
HyperVector default_theta_init(const LatentModel& model);

/// Optimize, explore, summarize, and optionally run the MCMC cross-validator.
FitResult fit(std::shared_ptr<const LatentModel> model, std::shared_ptr<const CountData> data,
              const FitOptions& options = {});

/// Draws Theta from the latent model and Poisson counts with
/// eta_ik = log E_ik + a_k + theta_ik.
CountData simulate_data(const LatentModel& model, const HyperVector& theta,
                        const Eigen::MatrixXd& expected, const Eigen::VectorXd& intercepts,
                        std::uint64_t seed);

}  // namespace mvcar
