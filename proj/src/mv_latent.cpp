#include "mvcar/mv_latent.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include "mvcar/errors.hpp"

namespace mvcar {

std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::IndepIMCAR: return "indimcar";
    case ModelKind::IndepPMCAR: return "indpmcar";
    case ModelKind::IMCAR: return "imcar";
    case ModelKind::PMCAR: return "pmcar";
    case ModelKind::MModel: return "mmodel";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (ModelKind k : kAllModelKinds)
    if (lower == model_name(k)) return k;
  throw ValidationError("unknown model kind '" + std::string(name) +
                        "' (expected indimcar, indpmcar, imcar, pmcar or mmodel)");
}

bool is_intrinsic(ModelKind kind) {
  return kind == ModelKind::IndepIMCAR || kind == ModelKind::IMCAR;
}

bool has_correlations(ModelKind kind) {
  return kind == ModelKind::IMCAR || kind == ModelKind::PMCAR;
}

int alpha_count(ModelKind kind, int n_variables) {
  switch (kind) {
    case ModelKind::IndepPMCAR:
    case ModelKind::PMCAR: return 1;
    case ModelKind::MModel: return n_variables;
    default: return 0;
  }
}

int theta_dim(ModelKind kind, int K) {
  switch (kind) {
    case ModelKind::IndepIMCAR: return K;
    case ModelKind::IndepPMCAR: return K + 1;
    case ModelKind::IMCAR: return K * (K + 1) / 2;
    case ModelKind::PMCAR: return K * (K + 1) / 2 + 1;
    case ModelKind::MModel: return K + K * K;
  }
  return 0;
}

// ---------------------------------------------------------------------------

LatentModel::LatentModel(ModelKind kind, int n_variables, std::shared_ptr<const ArealGraph> graph,
                         LatentOptions options)
    : kind_(kind), k_(n_variables), graph_(std::move(graph)), options_(std::move(options)) {
  if (!graph_) throw ValidationError("latent model needs a graph");
  if (k_ < 1) throw ValidationError("number of variables must be >= 1");
  require_no_isolated(*graph_);
  if (!(options_.mmodel_tau > 0.0)) throw ValidationError("M-model tau must be > 0");
  if (!options_.wishart_r) options_.wishart_r = static_cast<double>(k_);
  if (!options_.wishart_R) options_.wishart_R = Eigen::MatrixXd::Identity(k_, k_);
  if (*options_.wishart_r <= k_ - 1)
    throw ValidationError("Wishart degrees of freedom must exceed K - 1");
  const Eigen::MatrixXd& R = *options_.wishart_R;
  if (R.rows() != k_ || R.cols() != k_ || R != R.transpose() ||
      Eigen::LLT<Eigen::MatrixXd>(R).info() != Eigen::Success)
    throw ValidationError("Wishart R must be a K x K symmetric positive definite matrix");

  components_ = connected_components(*graph_);
  if (is_intrinsic(kind_)) {
    intrinsic_ = intrinsic_precision(*graph_);
    intrinsic_log_pdet_ = mvcar::intrinsic_log_pdet(*graph_);
  } else {
    admissible_ = alpha_bounds(*graph_);
    const AlphaRange& r = options_.alpha_range;
    if (!(r.min < r.max)) throw ValidationError("alpha range must satisfy alpha_min < alpha_max");
    if (!admissible_->contains(r.min, 1e-8) || !admissible_->contains(r.max, 1e-8))
      throw ValidationError("alpha range [" + std::to_string(r.min) + ", " + std::to_string(r.max) +
                            "] is not inside the admissible interval [" +
                            std::to_string(admissible_->lower) + ", " +
                            std::to_string(admissible_->upper) + "]");
  }
}

SparseSym LatentModel::proper_structure(double alpha) const {
  return proper_precision(*graph_, alpha,
                          admissible_ ? *admissible_ : AlphaBounds{-1e300, 1.0});
}

std::vector<std::string> internal_names(ModelKind kind, int k_) {
  std::vector<std::string> names;
  if (kind == ModelKind::MModel) {
    for (int k = 1; k <= k_; ++k) names.push_back("alpha_star_" + std::to_string(k));
    for (int j = 1; j <= k_; ++j)
      for (int i = 1; i <= k_; ++i) names.push_back("m_" + std::to_string(i) + std::to_string(j));
    return names;
  }
  if (alpha_count(kind, k_) == 1) names.emplace_back("alpha_star");
  for (int k = 1; k <= k_; ++k) names.push_back("log_tau_" + std::to_string(k));
  if (has_correlations(kind))
    for (int j = 1; j <= k_; ++j)
      for (int i = j + 1; i <= k_; ++i)
        names.push_back("rho_star_" + std::to_string(i) + std::to_string(j));
  return names;
}

std::vector<std::string> natural_names(ModelKind kind, int k_) {
  std::vector<std::string> names;
  if (kind == ModelKind::MModel) {
    for (int k = 1; k <= k_; ++k) names.push_back("alpha_" + std::to_string(k));
    for (int j = 1; j <= k_; ++j)
      for (int i = 1; i <= k_; ++i) names.push_back("m_" + std::to_string(i) + std::to_string(j));
    return names;
  }
  if (alpha_count(kind, k_) == 1) names.emplace_back("alpha");
  for (int k = 1; k <= k_; ++k) names.push_back("var_" + std::to_string(k));
  if (has_correlations(kind))
    for (int j = 1; j <= k_; ++j)
      for (int i = j + 1; i <= k_; ++i)
        names.push_back("rho_" + std::to_string(i) + std::to_string(j));
  return names;
}

// ---------------------------------------------------------------------------

namespace {

double expit(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

// log expit(x) + log(1 - expit(x)), computed without cancellation.
double log_logistic_jacobian(double x) { return -std::abs(x) - 2.0 * std::log1p(std::exp(-std::abs(x))); }

double alpha_from_star(const AlphaRange& r, double star) {
  return r.min + (r.max - r.min) * expit(star);
}

double alpha_to_star(const AlphaRange& r, double alpha) {
  return logit((alpha - r.min) / (r.max - r.min));
}

// rho = 2 expit(rho*) - 1 = tanh(rho*/2); rho* = 2 atanh(rho).
double rho_from_star(double star) { return std::tanh(0.5 * star); }
double rho_to_star(double rho) { return 2.0 * std::atanh(rho); }

// Unpacked theta, no validity checks beyond shapes.
struct Decoded {
  Eigen::VectorXd alpha;
  Eigen::VectorXd log_tau;  // MCAR kinds
  Eigen::MatrixXd corr;     // MCAR kinds
  Eigen::MatrixXd M;        // MModel
};

Decoded decode(ModelKind kind, int K, const AlphaRange& range, const HyperVector& theta) {
  if (theta.size() != theta_dim(kind, K))
    throw ValidationError("hyperparameter vector has length " + std::to_string(theta.size()) +
                          ", expected " + std::to_string(theta_dim(kind, K)));
  if (!theta.values().allFinite()) throw InvalidHyperparameters("non-finite hyperparameter");
  Decoded d;
  const int na = alpha_count(kind, K);
  d.alpha.resize(na);
  for (int a = 0; a < na; ++a) d.alpha[a] = alpha_from_star(range, theta[a]);

  if (kind == ModelKind::MModel) {
    d.M = Eigen::Map<const Eigen::MatrixXd>(theta.values().data() + K, K, K);
    return d;
  }
  d.log_tau = theta.values().segment(na, K);
  d.corr = Eigen::MatrixXd::Identity(K, K);
  if (has_correlations(kind)) {
    int idx = na + K;
    for (int j = 0; j < K; ++j)
      for (int i = j + 1; i < K; ++i) {
        const double rho = rho_from_star(theta[idx++]);
        d.corr(i, j) = rho;
        d.corr(j, i) = rho;
      }
  }
  return d;
}

Decoded decode(const LatentModel& model, const HyperVector& theta) {
  return decode(model.kind(), model.n_variables(), model.alpha_range(), theta);
}

void check_alphas(const AlphaRange& range, const std::optional<AlphaBounds>& adm,
                  const Eigen::VectorXd& alpha) {
  for (Eigen::Index a = 0; a < alpha.size(); ++a) {
    // Open interval: at the boundary D - alpha W is singular.
    if (!(alpha[a] > range.min) || !(alpha[a] < range.max))
      throw InvalidHyperparameters("alpha rounds onto the boundary of its range");
    if (adm && (!(alpha[a] > adm->lower) || !(alpha[a] < adm->upper)))
      throw InvalidHyperparameters("alpha rounds onto the boundary of the admissible interval");
  }
}

void check_alphas(const LatentModel& model, const Eigen::VectorXd& alpha) {
  check_alphas(model.alpha_range(), model.admissible(), alpha);
}

// Correlation matrix must be PD with |rho| < 1.
Eigen::LLT<Eigen::MatrixXd> checked_corr_llt(const Eigen::MatrixXd& corr) {
  for (Eigen::Index j = 0; j < corr.cols(); ++j)
    for (Eigen::Index i = j + 1; i < corr.rows(); ++i)
      if (!(std::abs(corr(i, j)) < 1.0)) throw InvalidHyperparameters("|rho| >= 1");
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success) throw InvalidHyperparameters("correlation matrix is not PD");
  const Eigen::VectorXd d = llt.matrixL().toDenseMatrix().diagonal();
  if (!(d.minCoeff() > 1e-7)) throw InvalidHyperparameters("correlation matrix is not PD");
  return llt;
}

void check_m(const Eigen::MatrixXd& M) {
  const double det = M.fullPivLu().determinant();
  const double scale = std::pow(M.norm(), static_cast<double>(M.rows()));
  if (!(std::abs(det) >= 1e-12 * scale) || scale == 0.0)
    throw InvalidHyperparameters("M is singular");
}

// Lambda = S P^{-1} S with S = diag(exp(theta_k / 2)). With P = I this is
// exactly diag(exp(theta_k/2)^2), so independent and correlated kinds agree
// entrywise at rho = 0.
Eigen::MatrixXd lambda_from(const Eigen::VectorXd& log_tau, const Eigen::MatrixXd& corr) {
  const auto llt = checked_corr_llt(corr);
  const Eigen::Index K = corr.rows();
  Eigen::MatrixXd pinv = llt.solve(Eigen::MatrixXd::Identity(K, K));
  pinv = (0.5 * (pinv + pinv.transpose())).eval();
  const Eigen::VectorXd s = (0.5 * log_tau).array().exp();
  Eigen::MatrixXd lambda(K, K);
  for (Eigen::Index j = 0; j < K; ++j)
    for (Eigen::Index i = j; i < K; ++i) lambda(i, j) = lambda(j, i) = s[i] * pinv(i, j) * s[j];
  return lambda;
}

Eigen::MatrixXd lambda_inv_from(const Eigen::VectorXd& log_tau, const Eigen::MatrixXd& corr) {
  const Eigen::Index K = corr.rows();
  const Eigen::VectorXd var = (-log_tau).array().exp();
  Eigen::MatrixXd out(K, K);
  for (Eigen::Index j = 0; j < K; ++j)
    for (Eigen::Index i = j; i < K; ++i)
      out(i, j) = out(j, i) = i == j ? var[i] : corr(i, j) * std::sqrt(var[i] * var[j]);
  return out;
}

double log_det_corr(const Eigen::MatrixXd& corr) {
  const auto llt = checked_corr_llt(corr);
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

double log_mv_gamma(int K, double a) {
  double out = 0.25 * K * (K - 1) * std::log(std::numbers::pi);
  for (int j = 1; j <= K; ++j) out += std::lgamma(a + 0.5 * (1 - j));
  return out;
}

// vech(Lambda^{-1}) as a function of (log tau, rho*): diagonal first, then
// off-diagonal entries in the rho* order.
Eigen::VectorXd vech_lambda_inv(int K, const Eigen::VectorXd& sub) {
  Eigen::VectorXd log_tau = sub.head(K);
  Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(K, K);
  int idx = K;
  for (int j = 0; j < K; ++j)
    for (int i = j + 1; i < K; ++i) {
      corr(i, j) = corr(j, i) = rho_from_star(sub[idx++]);
    }
  const Eigen::MatrixXd li = lambda_inv_from(log_tau, corr);
  Eigen::VectorXd out(sub.size());
  for (int k = 0; k < K; ++k) out[k] = li(k, k);
  idx = K;
  for (int j = 0; j < K; ++j)
    for (int i = j + 1; i < K; ++i) out[idx++] = li(i, j);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

NaturalParams to_natural(const LatentModel& model, const HyperVector& theta) {
  const Decoded d = decode(model, theta);
  check_alphas(model, d.alpha);
  return to_natural(model.kind(), model.n_variables(), model.alpha_range(), theta);
}

NaturalParams to_natural(ModelKind kind, int K, const AlphaRange& range, const HyperVector& theta) {
  const Decoded d = decode(kind, K, range, theta);
  check_alphas(range, std::nullopt, d.alpha);
  NaturalParams p;
  p.alpha = d.alpha;
  if (kind == ModelKind::MModel) {
    check_m(d.M);
    p.M = d.M;
    p.between_cov = d.M.transpose() * d.M;
    p.variances = p.between_cov.diagonal();
    p.correlations.resize(K, K);
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j)
        p.correlations(i, j) =
            i == j ? 1.0 : p.between_cov(i, j) / std::sqrt(p.variances[i] * p.variances[j]);
    return p;
  }
  checked_corr_llt(d.corr);
  p.variances = (-d.log_tau).array().exp();
  p.correlations = d.corr;
  p.lambda_inv = lambda_inv_from(d.log_tau, d.corr);
  p.between_cov = *p.lambda_inv;
  return p;
}

HyperVector from_natural(const LatentModel& model, const NaturalParams& p) {
  const int K = model.n_variables();
  const int na = alpha_count(model.kind(), K);
  const AlphaRange& r = model.alpha_range();
  Eigen::VectorXd theta(model.theta_dim());

  if (p.alpha.size() != na)
    throw DomainError("expected " + std::to_string(na) + " alpha value(s), got " +
                      std::to_string(p.alpha.size()));
  for (int a = 0; a < na; ++a) {
    if (!(p.alpha[a] > r.min && p.alpha[a] < r.max))
      throw DomainError("alpha = " + std::to_string(p.alpha[a]) + " outside (" +
                        std::to_string(r.min) + ", " + std::to_string(r.max) + ")");
    theta[a] = alpha_to_star(r, p.alpha[a]);
  }

  if (model.kind() == ModelKind::MModel) {
    if (!p.M || p.M->rows() != K || p.M->cols() != K)
      throw DomainError("M-model parameters need a K x K matrix M");
    if (!p.M->allFinite()) throw DomainError("M has non-finite entries");
    theta.segment(na, K * K) = Eigen::Map<const Eigen::VectorXd>(p.M->data(), K * K);
    return HyperVector(std::move(theta));
  }

  if (p.variances.size() != K) throw DomainError("expected K variances");
  for (int k = 0; k < K; ++k) {
    if (!(p.variances[k] > 0.0) || !std::isfinite(p.variances[k]))
      throw DomainError("variances must be positive and finite");
    theta[na + k] = -std::log(p.variances[k]);
  }
  if (has_correlations(model.kind())) {
    if (p.correlations.rows() != K || p.correlations.cols() != K)
      throw DomainError("expected a K x K correlation matrix");
    int idx = na + K;
    for (int j = 0; j < K; ++j)
      for (int i = j + 1; i < K; ++i) {
        const double rho = p.correlations(i, j);
        if (!(std::abs(rho) < 1.0)) throw DomainError("correlations must lie in (-1, 1)");
        if (p.correlations(j, i) != rho) throw DomainError("correlation matrix must be symmetric");
        theta[idx++] = rho_to_star(rho);
      }
  }
  return HyperVector(std::move(theta));
}

Eigen::VectorXd natural_vector(const LatentModel& model, const NaturalParams& p) {
  const int K = model.n_variables();
  Eigen::VectorXd out(model.theta_dim());
  const int na = alpha_count(model.kind(), K);
  out.head(na) = p.alpha;
  if (model.kind() == ModelKind::MModel) {
    out.segment(na, K * K) = Eigen::Map<const Eigen::VectorXd>(p.M->data(), K * K);
    return out;
  }
  out.segment(na, K) = p.variances;
  if (has_correlations(model.kind())) {
    int idx = na + K;
    for (int j = 0; j < K; ++j)
      for (int i = j + 1; i < K; ++i) out[idx++] = p.correlations(i, j);
  }
  return out;
}

SparseSym precision(const LatentModel& model, const HyperVector& theta) {
  const Decoded d = decode(model, theta);
  check_alphas(model, d.alpha);
  const ArealGraph& g = model.graph();

  if (model.kind() != ModelKind::MModel) {
    const Eigen::MatrixXd lambda = lambda_from(d.log_tau, d.corr);
    if (!lambda.allFinite()) throw InvalidHyperparameters("between-variable precision overflows");
    return kron_dense_sparse(lambda, is_intrinsic(model.kind()) ? model.intrinsic_structure()
                                                                : model.proper_structure(d.alpha[0]));
  }

  check_m(d.M);
  const int K = model.n_variables();
  const int I = g.n_regions();
  const Eigen::MatrixXd minv = d.M.fullPivLu().inverse();
  // Block (j,l) = sum_k minv(j,k) minv(l,k) (D - alpha_k W) = a_jl D - b_jl W.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(K, K), b = Eigen::MatrixXd::Zero(K, K);
  for (int j = 0; j < K; ++j)
    for (int l = j; l < K; ++l) {
      double sa = 0.0, sb = 0.0;
      for (int k = 0; k < K; ++k) {
        const double w = minv(j, k) * minv(l, k);
        sa += w;
        sb += w * d.alpha[k];
      }
      a(j, l) = a(l, j) = sa;
      b(j, l) = b(l, j) = sb;
    }
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(K) * K * (I + 2 * g.n_edges()));
  for (int j = 0; j < K; ++j)
    for (int l = 0; l < K; ++l) {
      for (int i = 0; i < I; ++i)
        t.emplace_back(j * I + i, l * I + i, a(j, l) * static_cast<double>(g.neighbors()[i].size()));
      for (const auto& e : g.edges()) {
        t.emplace_back(j * I + e.a, l * I + e.b, -b(j, l));
        t.emplace_back(j * I + e.b, l * I + e.a, -b(j, l));
      }
    }
  return SparseSym::from_triplets(K * I, t);
}

double log_det_precision(const LatentModel& model, const HyperVector& theta) {
  const Decoded d = decode(model, theta);
  check_alphas(model, d.alpha);
  const int I = model.n_regions();
  const int K = model.n_variables();
  switch (model.kind()) {
    case ModelKind::IndepIMCAR:
    case ModelKind::IMCAR: {
      const double log_det_lambda = d.log_tau.sum() - log_det_corr(d.corr);
      const int rank = I - model.components().count;
      return rank * log_det_lambda + K * model.intrinsic_log_pdet();
    }
    case ModelKind::IndepPMCAR:
    case ModelKind::PMCAR: {
      const double log_det_lambda = d.log_tau.sum() - log_det_corr(d.corr);
      return I * log_det_lambda + K * cholesky(model.proper_structure(d.alpha[0])).log_det();
    }
    case ModelKind::MModel: {
      check_m(d.M);
      double out = -2.0 * I * std::log(std::abs(d.M.fullPivLu().determinant()));
      for (int k = 0; k < K; ++k) out += cholesky(model.proper_structure(d.alpha[k])).log_det();
      return out;
    }
  }
  return 0.0;
}

double wishart_log_density(const Eigen::MatrixXd& X, double dof, const Eigen::MatrixXd& scale) {
  const Eigen::Index K = X.rows();
  Eigen::LLT<Eigen::MatrixXd> lx(X), ls(scale);
  if (lx.info() != Eigen::Success) throw InvalidHyperparameters("Wishart argument is not PD");
  if (ls.info() != Eigen::Success) throw ValidationError("Wishart scale is not PD");
  const double log_det_x = 2.0 * lx.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double log_det_s = 2.0 * ls.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double trace = ls.solve(X).trace();
  return 0.5 * (dof - K - 1) * log_det_x - 0.5 * trace - 0.5 * dof * K * std::numbers::ln2 -
         0.5 * dof * log_det_s - log_mv_gamma(static_cast<int>(K), 0.5 * dof);
}

double wishart_log_jacobian(const LatentModel& model, const HyperVector& theta) {
  if (!has_correlations(model.kind()))
    throw ValidationError("Wishart Jacobian applies to IMCAR/PMCAR only");
  const int K = model.n_variables();
  const int na = alpha_count(model.kind(), K);
  const int m = K * (K + 1) / 2;
  const Eigen::VectorXd sub = theta.values().segment(na, m);
  constexpr double h = 1e-6;
  Eigen::MatrixXd J(m, m);
  for (int c = 0; c < m; ++c) {
    Eigen::VectorXd up = sub, down = sub;
    up[c] += h;
    down[c] -= h;
    J.col(c) = (vech_lambda_inv(K, up) - vech_lambda_inv(K, down)) / (2.0 * h);
  }
  return std::log(std::abs(J.partialPivLu().determinant()));
}

double log_prior(const LatentModel& model, const HyperVector& theta) {
  const Decoded d = decode(model, theta);
  check_alphas(model, d.alpha);
  const int K = model.n_variables();
  const int na = alpha_count(model.kind(), K);
  const AlphaRange& r = model.alpha_range();

  double lp = 0.0;
  for (int a = 0; a < na; ++a) lp += std::log(r.max - r.min) + log_logistic_jacobian(theta[a]);

  switch (model.kind()) {
    case ModelKind::IndepIMCAR:
    case ModelKind::IndepPMCAR:
      lp += -0.5 * d.log_tau.sum();
      break;
    case ModelKind::IMCAR:
    case ModelKind::PMCAR: {
      checked_corr_llt(d.corr);
      const Eigen::MatrixXd scale =
          model.wishart_R().llt().solve(Eigen::MatrixXd::Identity(K, K));
      lp += wishart_log_density(lambda_inv_from(d.log_tau, d.corr), model.wishart_r(), scale);
      lp += wishart_log_jacobian(model, theta);
      break;
    }
    case ModelKind::MModel: {
      check_m(d.M);
      const Eigen::MatrixXd scale = Eigen::MatrixXd::Identity(K, K) / model.mmodel_tau();
      const Eigen::MatrixXd mtm = d.M.transpose() * d.M;
      lp += wishart_log_density(0.5 * (mtm + mtm.transpose()), static_cast<double>(K), scale);
      if (model.mmodel_jacobian()) lp += std::log(std::abs(d.M.determinant()));
      break;
    }
  }
  return lp;
}

std::optional<ConstraintSet> constraints(const LatentModel& model) {
  if (!is_intrinsic(model.kind())) return std::nullopt;
  const int I = model.n_regions();
  const int K = model.n_variables();
  const Components& comps = model.components();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(K * comps.count, K * I);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < I; ++i) A(k * comps.count + comps.labels[i] - 1, k * I + i) = 1.0;
  return ConstraintSet(std::move(A), Eigen::VectorXd::Zero(K * comps.count));
}

// ---------------------------------------------------------------------------

EffectSampler::EffectSampler(const LatentModel& model, const HyperVector& theta)
    : n_regions_(model.n_regions()),
      n_variables_(model.n_variables()),
      factor_(cholesky(precision(model, theta),
                       is_intrinsic(model.kind()) ? JitterPolicy::standard() : JitterPolicy::none())) {
  if (auto c = constraints(model)) corrector_.emplace(factor_, *c);
}

Eigen::VectorXd EffectSampler::draw_vec(Rng& rng) const {
  Eigen::VectorXd x = factor_.whiten_inverse(standard_normal(factor_.dim(), rng));
  if (corrector_) x = corrector_->apply(x);
  return x;
}

Eigen::MatrixXd EffectSampler::draw(Rng& rng) const {
  const Eigen::VectorXd x = draw_vec(rng);
  return Eigen::Map<const Eigen::MatrixXd>(x.data(), n_regions_, n_variables_);
}

Eigen::MatrixXd sample_effects(const LatentModel& model, const HyperVector& theta, Rng& rng) {
  return EffectSampler(model, theta).draw(rng);
}

}  // namespace mvcar
