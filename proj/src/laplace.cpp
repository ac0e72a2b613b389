#include "mvcar/laplace.hpp"

#include <cmath>

#include "mvcar/errors.hpp"

namespace mvcar {

LaplaceProblem::LaplaceProblem(std::shared_ptr<const LatentModel> model, Design design,
                               std::shared_ptr<const Likelihood> likelihood, LaplaceOptions options)
    : model_(std::move(model)),
      design_(std::move(design)),
      likelihood_(std::move(likelihood)),
      options_(options) {
  if (!model_ || !likelihood_) throw ValidationError("Laplace problem needs a model and a likelihood");
  if (design_.n_latent() != model_->latent_dim())
    throw ValidationError("design has " + std::to_string(design_.n_latent()) +
                          " latent columns but the model has " +
                          std::to_string(model_->latent_dim()));
  if (likelihood_->n_cells() != design_.n_cells())
    throw ValidationError("likelihood and design disagree on the number of cells");
  if (!(options_.fixed_precision > 0.0)) throw ValidationError("fixed-effect precision must be > 0");
  if (options_.max_newton < 1) throw ValidationError("max_newton must be >= 1");

  if (auto c = mvcar::constraints(*model_)) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(c->rows(), design_.n_augmented());
    a.leftCols(c->cols()) = c->A;
    constraints_.emplace(std::move(a), c->e);
    aat_.compute(constraints_->A * constraints_->A.transpose());
    log_det_aat_ = 2.0 * aat_.matrixL().toDenseMatrix().diagonal().array().log().sum();
  }
}

namespace {

SparseSym augment(const SparseSym& q, int n_fixed, double tau) {
  const SparseMatrix& m = q.matrix();
  std::vector<Triplet> t;
  t.reserve(m.nonZeros() + n_fixed);
  for (int c = 0; c < m.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(m, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (int f = 0; f < n_fixed; ++f) t.emplace_back(q.dim() + f, q.dim() + f, tau);
  return SparseSym::from_triplets(q.dim() + n_fixed, t);
}

SparseSym conditional(const SparseSym& q, const SparseMatrix& a, const Eigen::VectorXd& curvature) {
  const SparseMatrix at = a.transpose();
  const SparseMatrix weighted = at * curvature.asDiagonal();
  const SparseMatrix h = q.matrix() + weighted * a;
  const SparseMatrix ht = h.transpose();
  return SparseSym(SparseMatrix(0.5 * (h + ht)));
}

}  // namespace

LaplaceEval LaplaceProblem::evaluate(const HyperVector& theta, const Eigen::VectorXd* warm_start,
                                     bool moments) const {
  if (theta.size() != model_->theta_dim())
    throw ValidationError("hyperparameter vector has length " + std::to_string(theta.size()) +
                          ", expected " + std::to_string(model_->theta_dim()));
  constexpr double kInf = std::numeric_limits<double>::infinity();
  LaplaceEval ev;
  ev.theta = theta;
  const int n = n_augmented();

  try {
    ev.log_prior = log_prior(*model_, theta);
    const SparseSym q =
        augment(precision(*model_, theta), n_fixed(), options_.fixed_precision);
    ev.prior_half_log_det = 0.5 * (log_det_precision(*model_, theta) +
                                   n_fixed() * std::log(options_.fixed_precision));

    auto objective = [&](const Eigen::VectorXd& x, LikelihoodTerms& out) {
      out = likelihood_->terms(design_.apply(x));
      return -0.5 * q.quadratic_form(x) + out.loglik;
    };
    auto project = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      if (!constraints_) return v;
      const Eigen::MatrixXd& A = constraints_->A;
      return v - A.transpose() * aat_.solve(A * v);
    };

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    LikelihoodTerms t;
    double f = 0.0;
    bool started = false;
    if (warm_start != nullptr && warm_start->size() == n && warm_start->allFinite()) {
      try {
        x = project(*warm_start);
        f = objective(x, t);
        started = true;
      } catch (const InvalidState&) {
      }
    }
    if (!started) {
      x.setZero();
      f = objective(x, t);
    }

    double g0 = -1.0;
    bool final_step = false;
    for (;;) {
      const Eigen::VectorXd g = -(q.matrix() * x) + design_.apply_transpose(t.grad);
      SparseSym h = conditional(q, design_.matrix(), t.curvature);
      CholFactor fac = cholesky(h);
      std::optional<KrigingCorrector> kc;
      if (constraints_) kc.emplace(fac, *constraints_);

      const double gn = project(g).lpNorm<Eigen::Infinity>();
      if (g0 < 0.0) g0 = gn;
      bool done = final_step || gn < options_.grad_tol * (1.0 + g0);

      if (!done && ev.newton_iters >= options_.max_newton) {
        ev.failure = "Newton iteration did not converge";
        ev.log_post = -kInf;
        return ev;
      }
      if (!done) {
        Eigen::VectorXd d = fac.solve(g);
        if (kc) d = kc->apply_homogeneous(d);
        // Predicted gain below the rounding level of f: the line search can
        // no longer tell steps apart, so take the full Newton step and stop.
        if (g.dot(d) <= 1e-12 * (1.0 + std::abs(f))) {
          x += d;
          f = objective(x, t);
          ++ev.newton_iters;
          final_step = true;
          continue;
        }
        double step = 1.0;
        bool moved = false;
        LikelihoodTerms tn;
        while (step >= 1e-10) {
          const Eigen::VectorXd xn = x + step * d;
          double fn = -kInf;
          try {
            fn = objective(xn, tn);
          } catch (const InvalidState&) {
          }
          if (fn >= f) {
            x = xn;
            f = fn;
            t = std::move(tn);
            moved = true;
            break;
          }
          step *= 0.5;
        }
        ++ev.newton_iters;
        if (moved) continue;
        // No ascent left in floating point: accept x when the Newton
        // decrement is at rounding level.
        if (!(g.dot(d) <= 1e-9 * (1.0 + std::abs(f)))) {
          ev.failure = "Newton line search failed";
          ev.log_post = -kInf;
          return ev;
        }
        done = true;
      }

      ev.converged = true;
      ev.mode = x;
      ev.loglik = t.loglik;
      ev.log_det_restricted = fac.log_det();
      if (kc) ev.log_det_restricted += kc->log_det_aqa() - log_det_aat_;
      ev.prior_precision.emplace(q);
      ev.conditional_precision.emplace(std::move(h));
      ev.factor.emplace(std::move(fac));
      if (kc) ev.corrector.emplace(std::move(*kc));
      break;
    }

    ev.log_post = ev.log_prior + (-0.5 * q.quadratic_form(ev.mode) + ev.prior_half_log_det) +
                  ev.loglik - 0.5 * ev.log_det_restricted;
    if (!std::isfinite(ev.log_post)) {
      ev.failure = "non-finite log posterior";
      ev.log_post = -kInf;
      return ev;
    }
    if (moments) fill_moments(ev);
  } catch (const InvalidHyperparameters& e) {
    ev.failure = e.what();
    ev.log_post = -kInf;
  } catch (const NotPositiveDefinite& e) {
    ev.failure = e.what();
    ev.log_post = -kInf;
  } catch (const InvalidState& e) {
    ev.failure = e.what();
    ev.log_post = -kInf;
  } catch (const ConstraintDegeneracy& e) {
    ev.failure = e.what();
    ev.log_post = -kInf;
  } catch (const DomainError& e) {
    ev.failure = e.what();
    ev.log_post = -kInf;
  }
  if (!ev.ok()) ev.converged = false;
  return ev;
}

void LaplaceProblem::fill_moments(LaplaceEval& ev) const {
  const int nl = n_latent();
  const int nf = n_fixed();
  const Eigen::MatrixXd at = Eigen::MatrixXd(design_.matrix().transpose());
  const Eigen::MatrixXd x = ev.factor->solve(at);
  ev.eta_mean = design_.apply(ev.mode);
  ev.eta_var = (at.array() * x.array()).colwise().sum().transpose();

  Eigen::MatrixXd ef = Eigen::MatrixXd::Zero(n_augmented(), nf);
  for (int f = 0; f < nf; ++f) ef(nl + f, f) = 1.0;
  const Eigen::MatrixXd y = ev.factor->solve(ef);
  ev.fixed_var.resize(nf);
  for (int f = 0; f < nf; ++f) ev.fixed_var[f] = y(nl + f, f);

  if (ev.corrector) {
    const Eigen::MatrixXd& w = ev.corrector->q_inv_at();
    const Eigen::MatrixXd b = design_.matrix() * w;
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const Eigen::VectorXd bj = b.row(j).transpose();
      ev.eta_var[j] -= bj.dot(ev.corrector->solve_aqa(bj));
    }
    for (int f = 0; f < nf; ++f) {
      const Eigen::VectorXd wf = w.row(nl + f).transpose();
      ev.fixed_var[f] -= wf.dot(ev.corrector->solve_aqa(wf));
    }
  }
  ev.eta_var = ev.eta_var.cwiseMax(0.0);
  ev.fixed_var = ev.fixed_var.cwiseMax(0.0);
}

double LaplaceProblem::log_prior_latent(const LaplaceEval& ev, const Eigen::VectorXd& x) const {
  if (!ev.prior_precision) throw InvalidState("Laplace evaluation was rejected");
  return -0.5 * ev.prior_precision->quadratic_form(x) + ev.prior_half_log_det;
}

double LaplaceProblem::log_joint(const LaplaceEval& ev, const Eigen::VectorXd& x) const {
  return ev.log_prior + log_prior_latent(ev, x) + likelihood_->terms(design_.apply(x)).loglik;
}

double LaplaceProblem::log_approx(const LaplaceEval& ev, const Eigen::VectorXd& x) const {
  if (!ev.conditional_precision) throw InvalidState("Laplace evaluation was rejected");
  const Eigen::VectorXd d = x - ev.mode;
  return -0.5 * ev.conditional_precision->quadratic_form(d) + 0.5 * ev.log_det_restricted;
}

Eigen::VectorXd LaplaceProblem::draw_latent(const LaplaceEval& ev, Rng& rng) const {
  if (!ev.factor) throw InvalidState("Laplace evaluation was rejected");
  Eigen::VectorXd d = ev.factor->whiten_inverse(standard_normal(ev.factor->dim(), rng));
  if (ev.corrector) d = ev.corrector->apply_homogeneous(d);
  return ev.mode + d;
}

LaplaceEval gaussian_approx(const LaplaceProblem& problem, const HyperVector& theta,
                            const Eigen::VectorXd* warm_start, bool moments) {
  return problem.evaluate(theta, warm_start, moments);
}

}  // namespace mvcar
