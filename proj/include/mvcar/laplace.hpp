#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "mvcar/likelihood_model.hpp"
#include "mvcar/mv_latent.hpp"
#include "mvcar/sparse_symmetric.hpp"

namespace mvcar {

struct LaplaceOptions {
  /// Prior precision of every fixed effect (intercepts, coefficients).
  double fixed_precision = 0.001;
  int max_newton = 50;
  /// Convergence when |projected gradient|_inf < tol * (1 + |initial|_inf).
  double grad_tol = 1e-6;
};

/// Gaussian approximation of x | theta, y at its mode and the Laplace
/// approximation of log pi(theta | y) built from it.
struct LaplaceEval {
  HyperVector theta;
  /// Unnormalized log posterior of theta; -inf for rejected points.
  double log_post = -std::numeric_limits<double>::infinity();
  double log_prior = 0.0;
  double loglik = 0.0;
  bool converged = false;
  int newton_iters = 0;
  std::string failure;

  /// Augmented mode x* = (vec Theta, fixed effects).
  Eigen::VectorXd mode;
  /// Prior precision blockdiag(Q(theta), tau_f I) and
  /// 1/2 log det of it (generalized for intrinsic kinds).
  std::optional<SparseSym> prior_precision;
  double prior_half_log_det = 0.0;
  /// Conditional precision H = Q + A^T C A at the mode and its factor.
  std::optional<SparseSym> conditional_precision;
  std::optional<CholFactor> factor;
  std::optional<KrigingCorrector> corrector;
  /// log det of H restricted to the constraint subspace.
  double log_det_restricted = 0.0;

  /// Filled when moments are requested: mean and variance of every linear
  /// predictor entry and the variance of every fixed effect.
  Eigen::VectorXd eta_mean;
  Eigen::VectorXd eta_var;
  Eigen::VectorXd fixed_var;

  bool ok() const noexcept { return std::isfinite(log_post); }
};

/// Everything except theta: latent model, design, observation model.
/// Evaluation is const and thread-safe.
class LaplaceProblem {
 public:
  LaplaceProblem(std::shared_ptr<const LatentModel> model, Design design,
                 std::shared_ptr<const Likelihood> likelihood, LaplaceOptions options = {});

  const LatentModel& model() const noexcept { return *model_; }
  const std::shared_ptr<const LatentModel>& model_ptr() const noexcept { return model_; }
  const Design& design() const noexcept { return design_; }
  const Likelihood& likelihood() const noexcept { return *likelihood_; }
  const LaplaceOptions& options() const noexcept { return options_; }
  int n_augmented() const noexcept { return design_.n_augmented(); }
  int n_latent() const noexcept { return design_.n_latent(); }
  int n_fixed() const noexcept { return design_.n_fixed(); }
  /// Constraints on the augmented vector (fixed effects unconstrained).
  const std::optional<ConstraintSet>& constraints() const noexcept { return constraints_; }

  /// Never throws for invalid theta: the result has log_post = -inf and a
  /// failure message. `warm_start` (augmented, any vector) seeds Newton.
  LaplaceEval evaluate(const HyperVector& theta, const Eigen::VectorXd* warm_start = nullptr,
                       bool moments = false) const;

  /// -1/2 x^T Q x + 1/2 log det Q (Gaussian constants dropped).
  double log_prior_latent(const LaplaceEval& eval, const Eigen::VectorXd& x) const;
  /// log pi(theta) + log pi(x | theta) + log L(y | x); throws InvalidState
  /// when the linear predictor diverges.
  double log_joint(const LaplaceEval& eval, const Eigen::VectorXd& x) const;
  /// Log density of the Gaussian approximation at x (same constants).
  double log_approx(const LaplaceEval& eval, const Eigen::VectorXd& x) const;
  /// Draw x from the Gaussian approximation (constrained for intrinsic kinds).
  Eigen::VectorXd draw_latent(const LaplaceEval& eval, Rng& rng) const;

 private:
  void fill_moments(LaplaceEval& eval) const;

  std::shared_ptr<const LatentModel> model_;
  Design design_;
  std::shared_ptr<const Likelihood> likelihood_;
  LaplaceOptions options_;
  std::optional<ConstraintSet> constraints_;
  double log_det_aat_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> aat_;
};

/// Convenience wrapper around LaplaceProblem::evaluate.
LaplaceEval gaussian_approx(const LaplaceProblem& problem, const HyperVector& theta,
                            const Eigen::VectorXd* warm_start = nullptr, bool moments = false);

}  // namespace mvcar
