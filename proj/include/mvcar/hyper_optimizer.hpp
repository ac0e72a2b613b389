#pragma once

#include <functional>

#include <Eigen/Dense>

#include "mvcar/laplace.hpp"

namespace mvcar {

using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;

struct NelderMeadOptions {
  double initial_step = 0.5;
  /// Stop when every vertex is within xtol (inf-norm) of the best one and
  /// the spread of values is below ftol.
  double xtol = 1e-4;
  double ftol = 1e-7;
  /// 0 selects 300 * (p + 1) per run.
  int max_evals = 0;
  /// Fresh simplices built around the best point after convergence.
  int restarts = 2;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Maximizes f. Points where f is -inf or NaN are treated as infeasible.
NelderMeadResult nelder_mead_maximize(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                                      const NelderMeadOptions& options = {});

/// Central-difference Hessian of f with step h; points are evaluated in
/// parallel. Entries whose stencil hits a non-finite value are set to 0.
Eigen::MatrixXd fd_hessian(const ObjectiveFn& f, const Eigen::VectorXd& x, double h,
                           int threads = 1);

/// Symmetrizes and floors the eigenvalues at `floor`.
Eigen::MatrixXd repair_pd(const Eigen::MatrixXd& h, double floor = 1e-6);

struct OptimizerOptions {
  NelderMeadOptions simplex{};
  double hessian_step = 0.005;
  double eigen_floor = 1e-6;
  /// Newton refinement after the simplex search, using the gradient and
  /// Hessian of the finite-difference stencil. Stops when the step is below
  /// polish_xtol (inf-norm), the Newton decrement g'd is below polish_ftol,
  /// or no step-halving improves the value. Steps are capped at
  /// polish_max_step per coordinate.
  int polish_iterations = 20;
  double polish_xtol = 1e-6;
  double polish_ftol = 1e-10;
  double polish_max_step = 1.0;
  int threads = 1;
};

/// Maximizer of a generic objective with the Hessian of -f there: simplex
/// search, Newton polish, and the final stencil's Hessian.
struct FunctionMode {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::MatrixXd hessian;      // repaired
  Eigen::MatrixXd raw_hessian;  // symmetrized only
  int evaluations = 0;
  bool converged = false;
};

FunctionMode optimize_function(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                               const OptimizerOptions& options = {});

struct HyperMode {
  HyperVector theta;
  double log_post = 0.0;
  /// Hessian of -log_post at theta (repaired to PD) and before repair.
  Eigen::MatrixXd hessian;
  Eigen::MatrixXd raw_hessian;
  int evaluations = 0;
  bool converged = false;
  /// Evaluation at the mode, with predictor moments.
  LaplaceEval eval;
};

/// Throws OptimizationFailure when theta_init and every probed point are
/// rejected.
HyperMode optimize_hyper(const LaplaceProblem& problem, const HyperVector& theta_init,
                         const OptimizerOptions& options = {});

}  // namespace mvcar
