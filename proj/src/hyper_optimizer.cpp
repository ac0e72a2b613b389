#include "mvcar/hyper_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mvcar/errors.hpp"
#include "mvcar/parallel.hpp"

namespace mvcar {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Vertex {
  Eigen::VectorXd x;
  double cost = kInf;  // -f
};

// One Nelder-Mead run with the dimension-adaptive coefficients of Gao & Han.
NelderMeadResult simplex_run(const std::function<double(const Eigen::VectorXd&)>& cost,
                             const Eigen::VectorXd& x0, double step, const NelderMeadOptions& o,
                             int max_evals) {
  const Eigen::Index p = x0.size();
  const double dp = static_cast<double>(p);
  const double c_refl = 1.0;
  const double c_exp = 1.0 + 2.0 / dp;
  const double c_con = 0.75 - 1.0 / (2.0 * dp);
  const double c_shr = p > 1 ? 1.0 - 1.0 / dp : 0.5;

  NelderMeadResult res;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evaluations;
    const double c = cost(x);
    return std::isnan(c) ? kInf : c;
  };

  std::vector<Vertex> s(p + 1);
  s[0] = {x0, eval(x0)};
  for (Eigen::Index i = 0; i < p; ++i) {
    Eigen::VectorXd x = x0;
    x[i] += step;
    s[i + 1] = {x, eval(x)};
  }

  auto by_cost = [](const Vertex& a, const Vertex& b) { return a.cost < b.cost; };
  while (res.evaluations < max_evals) {
    std::stable_sort(s.begin(), s.end(), by_cost);
    if (!std::isfinite(s[0].cost)) break;

    double diameter = 0.0;
    for (Eigen::Index i = 1; i <= p; ++i)
      diameter = std::max(diameter, (s[i].x - s[0].x).lpNorm<Eigen::Infinity>());
    if (diameter < o.xtol && s[p].cost - s[0].cost < o.ftol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < p; ++i) centroid += s[i].x;
    centroid /= dp;
    Vertex& worst = s[p];

    const Eigen::VectorXd xr = centroid + c_refl * (centroid - worst.x);
    const double fr = eval(xr);
    if (fr < s[0].cost) {
      const Eigen::VectorXd xe = centroid + c_exp * (xr - centroid);
      const double fe = eval(xe);
      worst = fe < fr ? Vertex{xe, fe} : Vertex{xr, fr};
      continue;
    }
    if (fr < s[p - 1].cost) {
      worst = {xr, fr};
      continue;
    }
    bool shrink = false;
    if (fr < worst.cost) {
      const Eigen::VectorXd xc = centroid + c_con * (xr - centroid);
      const double fc = eval(xc);
      if (fc <= fr) worst = {xc, fc};
      else shrink = true;
    } else {
      const Eigen::VectorXd xc = centroid - c_con * (centroid - worst.x);
      const double fc = eval(xc);
      if (fc < worst.cost) worst = {xc, fc};
      else shrink = true;
    }
    if (shrink) {
      for (Eigen::Index i = 1; i <= p; ++i) {
        s[i].x = s[0].x + c_shr * (s[i].x - s[0].x);
        s[i].cost = eval(s[i].x);
      }
    }
  }
  std::stable_sort(s.begin(), s.end(), by_cost);
  res.x = s[0].x;
  res.value = -s[0].cost;
  return res;
}

}  // namespace

NelderMeadResult nelder_mead_maximize(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                                      const NelderMeadOptions& options) {
  if (x0.size() < 1) throw ValidationError("Nelder-Mead needs at least one parameter");
  if (!x0.allFinite()) throw ValidationError("Nelder-Mead start point must be finite");
  const int max_evals =
      options.max_evals > 0 ? options.max_evals : 300 * static_cast<int>(x0.size() + 1);
  auto cost = [&](const Eigen::VectorXd& x) { return -f(x); };

  NelderMeadResult best = simplex_run(cost, x0, options.initial_step, options, max_evals);
  int total = best.evaluations;
  for (int r = 0; r < options.restarts && std::isfinite(best.value); ++r) {
    NelderMeadResult next = simplex_run(cost, best.x, options.initial_step, options, max_evals);
    total += next.evaluations;
    const bool improved = next.value > best.value + options.ftol;
    if (next.value > best.value) best = next;
    if (!improved) break;
  }
  best.evaluations = total;
  if (!std::isfinite(best.value))
    throw OptimizationFailure("every point probed by the simplex search was rejected");
  return best;
}

namespace {

struct Stencil {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;  // of f itself
};

// Central differences on the 2p^2 + 1 point stencil: centre, +-h e_i, and
// (+-h, +-h) for each pair i < j. Entries whose stencil hits a non-finite
// value are left at 0.
Stencil fd_stencil(const ObjectiveFn& f, const Eigen::VectorXd& x, double h, int threads) {
  if (!(h > 0.0)) throw ValidationError("finite-difference step must be > 0");
  const int p = static_cast<int>(x.size());
  std::vector<Eigen::VectorXd> pts;
  pts.push_back(x);
  for (int i = 0; i < p; ++i) {
    for (double s : {1.0, -1.0}) {
      Eigen::VectorXd y = x;
      y[i] += s * h;
      pts.push_back(y);
    }
  }
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j)
      for (double si : {1.0, -1.0})
        for (double sj : {1.0, -1.0}) {
          Eigen::VectorXd y = x;
          y[i] += si * h;
          y[j] += sj * h;
          pts.push_back(y);
        }
  std::vector<double> v(pts.size());
  parallel_for(static_cast<int>(pts.size()), threads, [&](int k) { v[k] = f(pts[k]); });

  Stencil st;
  st.value = v[0];
  st.gradient = Eigen::VectorXd::Zero(p);
  st.hessian = Eigen::MatrixXd::Zero(p, p);
  auto finite = [](std::initializer_list<double> xs) {
    return std::all_of(xs.begin(), xs.end(), [](double a) { return std::isfinite(a); });
  };
  const double f0 = v[0];
  for (int i = 0; i < p; ++i) {
    const double fp = v[1 + 2 * i], fm = v[2 + 2 * i];
    if (finite({f0, fp, fm})) {
      st.hessian(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
      st.gradient[i] = (fp - fm) / (2.0 * h);
    }
  }
  std::size_t k = 1 + 2 * static_cast<std::size_t>(p);
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) {
      const double fpp = v[k], fpm = v[k + 1], fmp = v[k + 2], fmm = v[k + 3];
      k += 4;
      if (finite({fpp, fpm, fmp, fmm})) {
        const double hij = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
        st.hessian(i, j) = hij;
        st.hessian(j, i) = hij;
      }
    }
  return st;
}

struct PolishResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::MatrixXd neg_hessian;  // of -f at x
  int evaluations = 0;
  bool converged = false;
};

// Newton ascent on f with finite-difference gradient and PD-repaired
// Hessian, started from the simplex optimum. The Hessian at the final point
// is the last stencil, so a converged polish costs no extra evaluations.
// `make_f` is called once per centre so the objective can depend on it (the
// latent warm start).
PolishResult newton_polish(const std::function<ObjectiveFn(const Eigen::VectorXd&)>& make_f,
                           const Eigen::VectorXd& x0, double f_x0, const OptimizerOptions& o) {
  const auto p = x0.size();
  const int stencil_size = static_cast<int>(2 * p * p + 1);
  PolishResult r;
  r.x = x0;
  r.value = f_x0;
  for (int it = 0;; ++it) {
    const ObjectiveFn f = make_f(r.x);
    const Stencil st = fd_stencil(f, r.x, o.hessian_step, o.threads);
    r.evaluations += stencil_size;
    r.neg_hessian = -0.5 * (st.hessian + st.hessian.transpose());
    if (std::isfinite(st.value)) r.value = st.value;
    if (it == o.polish_iterations) break;

    Eigen::VectorXd d = repair_pd(r.neg_hessian, o.eigen_floor).llt().solve(st.gradient);
    const double dmax = d.lpNorm<Eigen::Infinity>();
    if (dmax > o.polish_max_step) d *= o.polish_max_step / dmax;
    if (d.lpNorm<Eigen::Infinity>() < o.polish_xtol || st.gradient.dot(d) < o.polish_ftol) {
      r.converged = true;
      break;
    }
    bool moved = false;
    for (double t = 1.0; t > 1e-4; t *= 0.5) {
      const Eigen::VectorXd y = r.x + t * d;
      const double fy = f(y);
      ++r.evaluations;
      if (std::isfinite(fy) && fy > r.value) {
        r.x = y;
        r.value = fy;
        moved = true;
        break;
      }
    }
    if (!moved) {
      r.converged = true;
      break;
    }
  }
  return r;
}

}  // namespace

Eigen::MatrixXd fd_hessian(const ObjectiveFn& f, const Eigen::VectorXd& x, double h, int threads) {
  return fd_stencil(f, x, h, threads).hessian;
}

Eigen::MatrixXd repair_pd(const Eigen::MatrixXd& h, double floor) {
  const Eigen::MatrixXd sym = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(floor);
  Eigen::MatrixXd out = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

FunctionMode optimize_function(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                               const OptimizerOptions& options) {
  const NelderMeadResult nm = nelder_mead_maximize(f, x0, options.simplex);
  const PolishResult pr =
      newton_polish([&](const Eigen::VectorXd&) { return f; }, nm.x, nm.value, options);
  FunctionMode m;
  m.x = pr.x;
  m.value = pr.value;
  m.converged = pr.converged;
  m.evaluations = nm.evaluations + pr.evaluations;
  m.raw_hessian = pr.neg_hessian;
  m.hessian = repair_pd(pr.neg_hessian, options.eigen_floor);
  return m;
}

HyperMode optimize_hyper(const LaplaceProblem& problem, const HyperVector& theta_init,
                         const OptimizerOptions& options) {
  if (theta_init.size() != problem.model().theta_dim())
    throw ValidationError("initial hyperparameter vector has the wrong length");

  // The simplex search is sequential, so the latent mode of the best point
  // so far is a deterministic warm start for the next Newton solve.
  Eigen::VectorXd warm;
  double best = -kInf;
  auto log_post = [&](const Eigen::VectorXd& t) {
    const LaplaceEval ev = problem.evaluate(HyperVector(t), warm.size() ? &warm : nullptr);
    if (ev.ok() && ev.log_post > best) {
      best = ev.log_post;
      warm = ev.mode;
    }
    return ev.log_post;
  };
  const NelderMeadResult nm = nelder_mead_maximize(log_post, theta_init.values(), options.simplex);

  // Stencil points are evaluated in parallel, all warm-started from the
  // latent mode at the stencil centre.
  auto make_f = [&](const Eigen::VectorXd& centre) -> ObjectiveFn {
    const LaplaceEval ev = problem.evaluate(HyperVector(centre), warm.size() ? &warm : nullptr);
    auto x_centre = std::make_shared<const Eigen::VectorXd>(ev.ok() ? ev.mode : warm);
    return [&problem, x_centre](const Eigen::VectorXd& t) {
      return problem.evaluate(HyperVector(t), x_centre->size() ? x_centre.get() : nullptr).log_post;
    };
  };
  const PolishResult pr = newton_polish(make_f, nm.x, nm.value, options);

  HyperMode m;
  m.theta = HyperVector(pr.x);
  m.eval = problem.evaluate(m.theta, warm.size() ? &warm : nullptr, true);
  if (!m.eval.ok()) throw OptimizationFailure("the located mode was rejected: " + m.eval.failure);
  m.log_post = m.eval.log_post;
  m.converged = pr.converged;
  m.raw_hessian = pr.neg_hessian;
  m.hessian = repair_pd(pr.neg_hessian, options.eigen_floor);
  m.evaluations = nm.evaluations + pr.evaluations + 1;
  return m;
}

}  // namespace mvcar
