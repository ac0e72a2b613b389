#include "mvcar/likelihood_model.hpp"

#include <cmath>
#include <string>

#include "mvcar/errors.hpp"

namespace mvcar {

int CountData::n_present() const {
  int n = 0;
  for (int k = 0; k < n_variables(); ++k)
    for (int i = 0; i < n_regions(); ++i) n += present(i, k);
  return n;
}

void CountData::validate() const {
  const int I = n_regions();
  const int K = n_variables();
  if (I < 1 || K < 1) throw ValidationError("count data is empty");
  if (expected.rows() != I || expected.cols() != K)
    throw ValidationError("expected counts must have the same shape as observed counts");
  if (!variable_labels.empty() && static_cast<int>(variable_labels.size()) != K)
    throw ValidationError("one label per variable is required");
  if (covariate_names.size() != covariates.size())
    throw ValidationError("one name per covariate is required");
  for (const auto& c : covariates)
    if (c.rows() != I || c.cols() != K)
      throw ValidationError("covariate matrices must be I x K");
  if (n_present() == 0) throw ValidationError("count data has no observations");

  for (int k = 0; k < K; ++k)
    for (int i = 0; i < I; ++i) {
      if (!present(i, k)) continue;
      const double y = observed(i, k);
      const std::string where =
          " (region " + std::to_string(i + 1) + ", variable " + std::to_string(k + 1) + ")";
      if (!(y >= 0.0) || y != std::floor(y) || !std::isfinite(y))
        throw ValidationError("observed counts must be non-negative integers" + where);
      if (!(expected(i, k) > 0.0) || !std::isfinite(expected(i, k)))
        throw ValidationError("expected counts must be positive" + where);
      for (std::size_t c = 0; c < covariates.size(); ++c)
        if (!std::isfinite(covariates[c](i, k)))
          throw ValidationError("covariate '" + covariate_names[c] + "' is missing" + where);
    }
}

Eigen::MatrixXd expected_counts(const Eigen::MatrixXd& observed, const Eigen::MatrixXd& population) {
  if (observed.rows() != population.rows() || observed.cols() != population.cols())
    throw ValidationError("observed and population must have the same shape");
  Eigen::MatrixXd e = Eigen::MatrixXd::Constant(observed.rows(), observed.cols(), std::nan(""));
  for (Eigen::Index k = 0; k < observed.cols(); ++k) {
    double so = 0.0, sn = 0.0;
    for (Eigen::Index i = 0; i < observed.rows(); ++i) {
      if (std::isnan(observed(i, k))) continue;
      if (!(population(i, k) > 0.0))
        throw ValidationError("population must be positive where counts are observed");
      so += observed(i, k);
      sn += population(i, k);
    }
    if (!(sn > 0.0))
      throw ValidationError("variable " + std::to_string(k + 1) + " has zero total population");
    const double r = so / sn;
    for (Eigen::Index i = 0; i < observed.rows(); ++i)
      if (!std::isnan(observed(i, k))) e(i, k) = r * population(i, k);
  }
  return e;
}

Eigen::MatrixXd smr(const Eigen::MatrixXd& observed, const Eigen::MatrixXd& expected) {
  if (observed.rows() != expected.rows() || observed.cols() != expected.cols())
    throw ValidationError("observed and expected must have the same shape");
  return observed.cwiseQuotient(expected);
}

LikelihoodTerms poisson_loglik_terms(const CountData& data, const Eigen::VectorXd& eta) {
  const int I = data.n_regions();
  const int K = data.n_variables();
  if (eta.size() != I * K) throw ValidationError("linear predictor has the wrong length");
  LikelihoodTerms t;
  t.grad = Eigen::VectorXd::Zero(eta.size());
  t.curvature = Eigen::VectorXd::Zero(eta.size());
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < I; ++i) {
      if (!data.present(i, k)) continue;
      const int j = k * I + i;
      const double e = eta[j];
      if (!std::isfinite(e)) throw InvalidState("non-finite linear predictor");
      if (e > 30.0) throw InvalidState("linear predictor exceeds 30; the fit is diverging");
      const double mu = std::exp(e);
      const double y = data.observed(i, k);
      t.loglik += y * e - mu;
      t.grad[j] = y - mu;
      t.curvature[j] = mu;
    }
  return t;
}

double poisson_log_pmf(double y, double eta) {
  return y * eta - std::exp(eta) - std::lgamma(y + 1.0);
}

double poisson_deviance(double y, double eta) {
  const double mu = std::exp(eta);
  const double ylog = y > 0.0 ? y * (std::log(y) - eta) : 0.0;
  return 2.0 * (ylog - (y - mu));
}

// ---------------------------------------------------------------------------

Design::Design(const CountData& data) {
  data.validate();
  const int I = data.n_regions();
  const int K = data.n_variables();
  const int C = data.n_covariates();
  n_latent_ = I * K;
  const int n = n_latent_ + K * (1 + C);

  offset_ = Eigen::VectorXd::Zero(I * K);
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(I) * K * (2 + C));
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < I; ++i) {
      const int row = k * I + i;
      const bool here = data.present(i, k);
      if (here) offset_[row] = std::log(data.expected(i, k));
      t.emplace_back(row, row, 1.0);
      t.emplace_back(row, n_latent_ + k, 1.0);
      for (int c = 0; c < C; ++c) {
        const double v = data.covariates[c](i, k);
        if (std::isfinite(v) && v != 0.0) t.emplace_back(row, n_latent_ + K * (1 + c) + k, v);
      }
    }
  a_.resize(I * K, n);
  a_.setFromTriplets(t.begin(), t.end());
  a_.makeCompressed();
}

Eigen::VectorXd Design::apply(const Eigen::VectorXd& x) const {
  if (x.size() != n_augmented()) throw ValidationError("design: augmented vector has the wrong length");
  return offset_ + a_ * x;
}

Eigen::VectorXd Design::apply_transpose(const Eigen::VectorXd& y) const {
  if (y.size() != n_cells()) throw ValidationError("design: cell vector has the wrong length");
  return a_.transpose() * y;
}

Design build_design(const CountData& data) { return Design(data); }

std::vector<std::string> fixed_effect_names(const CountData& data) {
  const int K = data.n_variables();
  auto label = [&](int k) {
    return data.variable_labels.empty() ? std::to_string(k + 1) : data.variable_labels[k];
  };
  std::vector<std::string> names;
  for (int k = 0; k < K; ++k) names.push_back("intercept_" + label(k));
  for (int c = 0; c < data.n_covariates(); ++c)
    for (int k = 0; k < K; ++k) names.push_back(data.covariate_names[c] + "_" + label(k));
  return names;
}

// ---------------------------------------------------------------------------

PoissonLikelihood::PoissonLikelihood(std::shared_ptr<const CountData> data) : data_(std::move(data)) {
  if (!data_) throw ValidationError("Poisson likelihood needs data");
  data_->validate();
}

int PoissonLikelihood::n_cells() const { return data_->n_regions() * data_->n_variables(); }

LikelihoodTerms PoissonLikelihood::terms(const Eigen::VectorXd& eta) const {
  return poisson_loglik_terms(*data_, eta);
}

GaussianPseudoLikelihood::GaussianPseudoLikelihood(Eigen::VectorXd y, Eigen::VectorXd weights)
    : y_(std::move(y)), w_(std::move(weights)) {
  if (y_.size() != w_.size()) throw ValidationError("pseudo-likelihood: y and weights differ in length");
  if (!y_.allFinite() || !(w_.array() > 0.0).all())
    throw ValidationError("pseudo-likelihood: y must be finite and weights positive");
}

LikelihoodTerms GaussianPseudoLikelihood::terms(const Eigen::VectorXd& eta) const {
  if (eta.size() != y_.size()) throw ValidationError("linear predictor has the wrong length");
  LikelihoodTerms t;
  const Eigen::VectorXd r = y_ - eta;
  t.loglik = -0.5 * (w_.array() * r.array().square()).sum();
  t.grad = w_.cwiseProduct(r);
  t.curvature = w_;
  return t;
}

LikelihoodTerms NullLikelihood::terms(const Eigen::VectorXd& eta) const {
  if (eta.size() != n_) throw ValidationError("linear predictor has the wrong length");
  return {0.0, Eigen::VectorXd::Zero(n_), Eigen::VectorXd::Zero(n_)};
}

}  // namespace mvcar
