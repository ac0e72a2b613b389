#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mvcar/sparse_symmetric.hpp"

namespace mvcar {

/// Counts on an I x K lattice. A cell whose observed value is NaN is absent
/// (no row in the data file); it contributes nothing to the likelihood but
/// still gets a fitted risk.
struct CountData {
  Eigen::MatrixXd observed;  // I x K, non-negative integers or NaN
  Eigen::MatrixXd expected;  // I x K, positive where observed is present
  std::vector<std::string> covariate_names;
  std::vector<Eigen::MatrixXd> covariates;  // each I x K
  std::vector<std::string> variable_labels;

  int n_regions() const noexcept { return static_cast<int>(observed.rows()); }
  int n_variables() const noexcept { return static_cast<int>(observed.cols()); }
  int n_covariates() const noexcept { return static_cast<int>(covariates.size()); }
  bool present(int i, int k) const { return !std::isnan(observed(i, k)); }
  int n_present() const;

  /// Throws ValidationError on shape mismatches, negative or non-integer
  /// counts, non-positive expected counts, and covariates missing where an
  /// observation exists.
  void validate() const;
};

/// E_ik = r_k N_ik with r_k = sum_i O_ik / sum_i N_ik (internal
/// standardization). NaN cells of `observed` are skipped in both sums and
/// stay NaN in the result.
Eigen::MatrixXd expected_counts(const Eigen::MatrixXd& observed, const Eigen::MatrixXd& population);

/// O / E elementwise.
Eigen::MatrixXd smr(const Eigen::MatrixXd& observed, const Eigen::MatrixXd& expected);

struct LikelihoodTerms {
  double loglik = 0.0;
  Eigen::VectorXd grad;       // d loglik / d eta
  Eigen::VectorXd curvature;  // -d^2 loglik / d eta^2
};

/// Poisson log-likelihood in the linear predictor eta (vec order, offset
/// included): sum over present cells of y eta - exp(eta). The constant
/// -log y! is dropped. Throws InvalidState when eta > 30 in a present cell.
LikelihoodTerms poisson_loglik_terms(const CountData& data, const Eigen::VectorXd& eta);

/// Poisson log pmf y eta - exp(eta) - lgamma(y + 1).
double poisson_log_pmf(double y, double eta);

/// Saturated-reference Poisson deviance 2 (y log(y / mu) - (y - mu)).
double poisson_deviance(double y, double eta);

/// Linear map from the augmented field x = (vec Theta, a_1..a_K,
/// beta_{1,1..K}, beta_{2,1..K}, ..) to eta = offset + A x, with
///
///   eta_ik = log E_ik + a_k + sum_c beta_{c,k} x_{c,ik} + theta_ik.
///
/// Absent cells get offset 0 and covariate value 0.
class Design {
 public:
  explicit Design(const CountData& data);

  int n_cells() const noexcept { return static_cast<int>(a_.rows()); }
  int n_augmented() const noexcept { return static_cast<int>(a_.cols()); }
  int n_latent() const noexcept { return n_latent_; }
  int n_fixed() const noexcept { return n_augmented() - n_latent_; }

  const SparseMatrix& matrix() const noexcept { return a_; }
  const Eigen::VectorXd& offset() const noexcept { return offset_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& y) const;

 private:
  SparseMatrix a_;
  Eigen::VectorXd offset_;
  int n_latent_ = 0;
};

Design build_design(const CountData& data);

/// Names of the fixed effects in augmented order.
std::vector<std::string> fixed_effect_names(const CountData& data);

/// Observation model seen by the Laplace engine: a separable function of the
/// linear predictor.
class Likelihood {
 public:
  virtual ~Likelihood() = default;
  virtual int n_cells() const = 0;
  virtual LikelihoodTerms terms(const Eigen::VectorXd& eta) const = 0;
};

class PoissonLikelihood final : public Likelihood {
 public:
  explicit PoissonLikelihood(std::shared_ptr<const CountData> data);
  int n_cells() const override;
  LikelihoodTerms terms(const Eigen::VectorXd& eta) const override;

 private:
  std::shared_ptr<const CountData> data_;
};

/// -1/2 sum_i w_i (y_i - eta_i)^2 (normalizing constants dropped). Makes the
/// latent model conjugate; used to check the Laplace engine against closed
/// forms.
class GaussianPseudoLikelihood final : public Likelihood {
 public:
  GaussianPseudoLikelihood(Eigen::VectorXd y, Eigen::VectorXd weights);
  int n_cells() const override { return static_cast<int>(y_.size()); }
  LikelihoodTerms terms(const Eigen::VectorXd& eta) const override;

 private:
  Eigen::VectorXd y_;
  Eigen::VectorXd w_;
};

/// Constant zero: the posterior equals the prior.
class NullLikelihood final : public Likelihood {
 public:
  explicit NullLikelihood(int n_cells) : n_(n_cells) {}
  int n_cells() const override { return n_; }
  LikelihoodTerms terms(const Eigen::VectorXd& eta) const override;

 private:
  int n_;
};

}  // namespace mvcar
