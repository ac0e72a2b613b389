#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mvcar/areal_graph.hpp"
#include "mvcar/car_precision.hpp"
#include "mvcar/sparse_symmetric.hpp"

namespace mvcar {

/// The five multivariate CAR latent effects.
///
///   IndepIMCAR  Lambda^{-1} (x) (D - W)^{-1},        Lambda diagonal
///   IndepPMCAR  Lambda^{-1} (x) (D - alpha W)^{-1},  Lambda diagonal
///   IMCAR       Lambda^{-1} (x) (D - W)^{-1},        Lambda dense
///   PMCAR       Lambda^{-1} (x) (D - alpha W)^{-1},  Lambda dense
///   MModel      Theta = Phi M, phi_k ~ N(0, (D - alpha_k W)^{-1})
enum class ModelKind { IndepIMCAR, IndepPMCAR, IMCAR, PMCAR, MModel };

inline constexpr ModelKind kAllModelKinds[] = {ModelKind::IndepIMCAR, ModelKind::IndepPMCAR,
                                               ModelKind::IMCAR, ModelKind::PMCAR,
                                               ModelKind::MModel};

/// Short lowercase name used on the command line and in result files.
std::string_view model_name(ModelKind kind);
/// Accepts the short names (case-insensitive).
ModelKind parse_model_kind(std::string_view name);

bool is_intrinsic(ModelKind kind);
bool has_correlations(ModelKind kind);
/// 0 for intrinsic kinds, 1 for IndepPMCAR/PMCAR, K for MModel.
int alpha_count(ModelKind kind, int n_variables);

/// Number of internal-scale hyperparameters:
/// K, K+1, K(K+1)/2, K(K+1)/2 + 1 and K + K^2.
int theta_dim(ModelKind kind, int n_variables);

/// Hyperparameter labels in layout order, e.g. "log_tau_1", "rho_star_21",
/// "m_12"; natural labels "var_1", "rho_21", "alpha".
std::vector<std::string> internal_names(ModelKind kind, int n_variables);
std::vector<std::string> natural_names(ModelKind kind, int n_variables);

struct AlphaRange {
  double min = 0.0;
  double max = 1.0;
};

struct LatentOptions {
  AlphaRange alpha_range{};
  /// Fixed precision tau of the M-model Wishart prior on M^T M.
  double mmodel_tau = 0.001;
  /// Adds log|det M| to the M-model prior, i.e. the density on M whose
  /// induced law of M^T M is that Wishart (iid N(0, 1/tau) entries of M).
  /// Without it the prior grows like -log|det M| and the posterior is
  /// unbounded near singular M.
  bool mmodel_jacobian = true;
  /// Wishart degrees of freedom r for IMCAR/PMCAR; defaults to K.
  std::optional<double> wishart_r;
  /// Wishart R for IMCAR/PMCAR; the scale matrix is R^{-1}. Defaults to I.
  std::optional<Eigen::MatrixXd> wishart_R;
};

/// Internal-scale hyperparameter vector. Layout per kind:
///
///   IndepIMCAR  (log tau_1..K)
///   IndepPMCAR  (alpha*, log tau_1..K)
///   IMCAR       (log tau_1..K, rho*_21, rho*_31, .., rho*_K1, rho*_32, ..)
///   PMCAR       (alpha*, log tau_1..K, rho*_21, ..)
///   MModel      (alpha*_1..K, m_11, m_21, .., m_K1, m_12, .., m_KK)
///
/// with alpha* = logit((alpha - alpha_min) / (alpha_max - alpha_min)) and
/// rho* = logit((rho + 1) / 2), i.e. rho = tanh(rho* / 2).
class HyperVector {
 public:
  HyperVector() = default;
  explicit HyperVector(Eigen::VectorXd values) : values_(std::move(values)) {}

  Eigen::Index size() const noexcept { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_[i]; }
  double& operator[](Eigen::Index i) { return values_[i]; }
  const Eigen::VectorXd& values() const noexcept { return values_; }

 private:
  Eigen::VectorXd values_;
};

/// Hyperparameters on their natural scale.
struct NaturalParams {
  /// 1/tau_k for MCAR kinds; diag(M^T M) for the M-model.
  Eigen::VectorXd variances;
  /// Unit diagonal. Identity for independent kinds.
  Eigen::MatrixXd correlations;
  /// Empty, a single common alpha, or one alpha per latent field (M-model).
  Eigen::VectorXd alpha;
  std::optional<Eigen::MatrixXd> M;
  /// Between-variable covariance Lambda^{-1} (MCAR kinds only).
  std::optional<Eigen::MatrixXd> lambda_inv;
  /// Lambda^{-1}, or M^T M for the M-model.
  Eigen::MatrixXd between_cov;
};

/// A multivariate latent effect on a fixed lattice. Immutable; all
/// operations on it are pure functions of (model, theta).
class LatentModel {
 public:
  LatentModel(ModelKind kind, int n_variables, std::shared_ptr<const ArealGraph> graph,
              LatentOptions options = {});

  ModelKind kind() const noexcept { return kind_; }
  int n_variables() const noexcept { return k_; }
  int n_regions() const noexcept { return graph_->n_regions(); }
  int latent_dim() const noexcept { return k_ * graph_->n_regions(); }
  int theta_dim() const noexcept { return mvcar::theta_dim(kind_, k_); }

  const ArealGraph& graph() const noexcept { return *graph_; }
  const std::shared_ptr<const ArealGraph>& graph_ptr() const noexcept { return graph_; }
  const AlphaRange& alpha_range() const noexcept { return options_.alpha_range; }
  /// Admissible interval of the graph (computed for kinds with alpha only).
  const std::optional<AlphaBounds>& admissible() const noexcept { return admissible_; }
  double mmodel_tau() const noexcept { return options_.mmodel_tau; }
  bool mmodel_jacobian() const noexcept { return options_.mmodel_jacobian; }
  double wishart_r() const noexcept { return *options_.wishart_r; }
  const Eigen::MatrixXd& wishart_R() const noexcept { return *options_.wishart_R; }

  const Components& components() const noexcept { return components_; }
  const SparseSym& intrinsic_structure() const noexcept { return *intrinsic_; }
  double intrinsic_log_pdet() const noexcept { return intrinsic_log_pdet_; }
  /// D - alpha W, validated against the admissible interval.
  SparseSym proper_structure(double alpha) const;

  std::vector<std::string> internal_names() const { return mvcar::internal_names(kind_, k_); }
  std::vector<std::string> natural_names() const { return mvcar::natural_names(kind_, k_); }

 private:
  ModelKind kind_;
  int k_;
  std::shared_ptr<const ArealGraph> graph_;
  LatentOptions options_;
  std::optional<AlphaBounds> admissible_;
  Components components_;
  std::optional<SparseSym> intrinsic_;
  double intrinsic_log_pdet_ = 0.0;
};

inline int theta_dim(const LatentModel& model) { return model.theta_dim(); }

/// Throws InvalidHyperparameters when theta maps outside the model
/// (non-PD Lambda^{-1}, singular M, alpha rounding onto the boundary).
NaturalParams to_natural(const LatentModel& model, const HyperVector& theta);

/// Same transform without a graph: alpha is checked against `range` only.
/// Used to post-process stored results.
NaturalParams to_natural(ModelKind kind, int n_variables, const AlphaRange& range,
                         const HyperVector& theta);

/// Throws DomainError for variances <= 0, |rho| >= 1, alpha outside the
/// model's range or inconsistent shapes.
HyperVector from_natural(const LatentModel& model, const NaturalParams& p);

/// Natural-scale values in the same order as `natural_names()`:
/// alpha(s), then variances and correlations (MCAR kinds) or vec(M).
Eigen::VectorXd natural_vector(const LatentModel& model, const NaturalParams& p);

/// Precision of vec(Theta), variable-major:
///   MCAR kinds  Lambda (x) (D - W) or Lambda (x) (D - alpha W)
///   MModel      (M^{-1} (x) I) blockdiag(D - alpha_k W) (M^{-T} (x) I)
SparseSym precision(const LatentModel& model, const HyperVector& theta);

/// log det of precision(); for intrinsic kinds the generalized determinant
/// (product of non-zero eigenvalues), (I - C) log|Lambda| + K log pdet(D - W).
double log_det_precision(const LatentModel& model, const HyperVector& theta);

/// Log prior density of theta (internal scale), up to an additive constant.
///
///   sigma_k ~ U(0, inf)       -theta_k / 2 per log-precision
///   alpha ~ U(min, max)       log(max - min) + log s + log(1 - s), s = expit(alpha*)
///   Lambda^{-1} ~ Wishart_K(r, R^{-1})   density at Lambda^{-1} plus the
///                             log |d vech(Lambda^{-1}) / d theta| (finite differences)
///   M^T M ~ Wishart_K(K, (tau I)^{-1})   density at M^T M, plus log|det M|
///                             unless mmodel_jacobian is off
///
/// Wishart_K(n, S) here has scale matrix S (mean n S):
///   log p(X) = (n-K-1)/2 log|X| - tr(S^{-1} X)/2 - nK/2 log 2 - n/2 log|S| - log Gamma_K(n/2)
double log_prior(const LatentModel& model, const HyperVector& theta);

double wishart_log_density(const Eigen::MatrixXd& X, double dof, const Eigen::MatrixXd& scale);

/// log |d vech(Lambda^{-1}) / d (log tau, rho*)| by central differences
/// (step 1e-6). IMCAR/PMCAR only.
double wishart_log_jacobian(const LatentModel& model, const HyperVector& theta);

/// Sum-to-zero constraints for intrinsic kinds: one row per (variable,
/// connected component). None for proper kinds and the M-model.
std::optional<ConstraintSet> constraints(const LatentModel& model);

/// Draws vec(Theta) for a fixed theta, reusing one factorization.
/// Intrinsic kinds are sampled with diagonal jitter and conditioned on the
/// sum-to-zero constraints.
class EffectSampler {
 public:
  EffectSampler(const LatentModel& model, const HyperVector& theta);

  Eigen::VectorXd draw_vec(Rng& rng) const;
  /// I x K, column k = variable k.
  Eigen::MatrixXd draw(Rng& rng) const;

 private:
  int n_regions_;
  int n_variables_;
  CholFactor factor_;
  std::optional<KrigingCorrector> corrector_;
};

Eigen::MatrixXd sample_effects(const LatentModel& model, const HyperVector& theta, Rng& rng);

}  // namespace mvcar
