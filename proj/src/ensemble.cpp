#include "mvcar/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/normal.hpp>

#include "mvcar/errors.hpp"
#include "mvcar/parallel.hpp"

namespace mvcar {

std::string_view explore_name(ExploreMode mode) {
  return mode == ExploreMode::Axis ? "axis" : "mode-only";
}

ExploreMode parse_explore_mode(std::string_view name) {
  if (name == "axis") return ExploreMode::Axis;
  if (name == "mode-only" || name == "mode") return ExploreMode::ModeOnly;
  throw ValidationError("unknown explore mode '" + std::string(name) + "' (expected mode-only or axis)");
}

Eigen::VectorXd ensemble_weights(const std::vector<double>& log_post) {
  if (log_post.empty()) throw InvalidState("empty ensemble");
  double top = -std::numeric_limits<double>::infinity();
  for (double v : log_post)
    if (std::isfinite(v)) top = std::max(top, v);
  if (!std::isfinite(top)) throw InvalidState("every ensemble point was rejected");
  Eigen::VectorXd w(log_post.size());
  for (std::size_t g = 0; g < log_post.size(); ++g)
    w[g] = std::isfinite(log_post[g]) ? std::exp(log_post[g] - top) : 0.0;
  return w / w.sum();
}

std::vector<HyperVector> axis_points(const HyperVector& mode, const Eigen::MatrixXd& hessian,
                                     double delta) {
  const Eigen::Index p = mode.size();
  if (hessian.rows() != p || hessian.cols() != p)
    throw ValidationError("Hessian does not match the hyperparameter dimension");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (hessian + hessian.transpose()));
  if (!(es.eigenvalues().minCoeff() > 0.0)) throw ValidationError("Hessian must be positive definite");
  std::vector<HyperVector> pts{mode};
  for (Eigen::Index j = 0; j < p; ++j) {
    const Eigen::VectorXd step = delta * es.eigenvectors().col(j) / std::sqrt(es.eigenvalues()[j]);
    pts.emplace_back(Eigen::VectorXd(mode.values() + step));
    pts.emplace_back(Eigen::VectorXd(mode.values() - step));
  }
  return pts;
}

Ensemble explore_ensemble(const LaplaceProblem& problem, const HyperMode& mode, ExploreMode explore,
                          double delta, int threads) {
  Ensemble e;
  if (explore == ExploreMode::ModeOnly) {
    e.evals.push_back(mode.eval);
  } else {
    const std::vector<HyperVector> pts = axis_points(mode.theta, mode.hessian, delta);
    e.evals.resize(pts.size());
    e.evals[0] = mode.eval;
    const Eigen::VectorXd warm = mode.eval.mode;
    parallel_for(static_cast<int>(pts.size()) - 1, threads,
                 [&](int g) { e.evals[g + 1] = problem.evaluate(pts[g + 1], &warm, true); });
  }
  std::vector<double> lp;
  for (const auto& ev : e.evals) lp.push_back(ev.log_post);
  e.weights = ensemble_weights(lp);
  return e;
}

// ---------------------------------------------------------------------------

namespace {

// Type-7 (linear interpolation) quantile of sorted data.
double sorted_quantile(const std::vector<double>& v, double p) {
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

ParamSummary weighted_summary(std::string name, const Eigen::VectorXd& values,
                              const Eigen::VectorXd& weights) {
  if (values.size() != weights.size() || values.size() == 0)
    throw ValidationError("weighted summary needs matching, non-empty inputs");
  const double wsum = weights.sum();
  ParamSummary s;
  s.name = std::move(name);
  s.mean = weights.dot(values) / wsum;
  double var = 0.0;
  for (Eigen::Index g = 0; g < values.size(); ++g)
    var += weights[g] * (values[g] - s.mean) * (values[g] - s.mean);
  s.sd = std::sqrt(var / wsum);

  std::vector<Eigen::Index> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values[a] < values[b]; });
  auto quantile = [&](double p) {
    double cum = 0.0;
    for (Eigen::Index idx : order) {
      if (weights[idx] <= 0.0) continue;
      cum += weights[idx] / wsum;
      if (cum >= p - 1e-12) return values[idx];
    }
    return values[order.back()];
  };
  s.q025 = quantile(0.025);
  s.q50 = quantile(0.5);
  s.q975 = quantile(0.975);
  return s;
}

HyperSummary summarize_hyper(const std::vector<HyperVector>& thetas, const Eigen::VectorXd& weights,
                             ModelKind kind, int K, const AlphaRange& range) {
  if (thetas.empty() || static_cast<Eigen::Index>(thetas.size()) != weights.size())
    throw ValidationError("ensemble points and weights differ in number");
  const int p = theta_dim(kind, K);
  std::vector<int> keep;
  for (std::size_t g = 0; g < thetas.size(); ++g)
    if (weights[g] > 0.0) keep.push_back(static_cast<int>(g));
  if (keep.empty()) throw InvalidState("ensemble has no positive weight");

  const int n = static_cast<int>(keep.size());
  Eigen::VectorXd w(n);
  Eigen::MatrixXd internal(n, p), natural(n, p);
  HyperSummary out;
  out.between_cov_mean = Eigen::MatrixXd::Zero(K, K);
  for (int r = 0; r < n; ++r) {
    const int g = keep[r];
    w[r] = weights[g];
    internal.row(r) = thetas[g].values().transpose();
    const NaturalParams np = to_natural(kind, K, range, thetas[g]);
    natural.row(r) = [&] {
      Eigen::VectorXd v(p);
      const int na = alpha_count(kind, K);
      v.head(na) = np.alpha;
      if (kind == ModelKind::MModel) {
        v.segment(na, K * K) = Eigen::Map<const Eigen::VectorXd>(np.M->data(), K * K);
      } else {
        v.segment(na, K) = np.variances;
        int idx = na + K;
        if (has_correlations(kind))
          for (int j = 0; j < K; ++j)
            for (int i = j + 1; i < K; ++i) v[idx++] = np.correlations(i, j);
      }
      return v;
    }().transpose();
    out.between_cov_mean += w[r] * np.between_cov;
  }
  out.between_cov_mean /= w.sum();
  out.between_cov_mean = 0.5 * (out.between_cov_mean + out.between_cov_mean.transpose()).eval();

  const auto in_names = internal_names(kind, K);
  const auto nat_names = natural_names(kind, K);
  for (int c = 0; c < p; ++c) {
    out.internal.push_back(weighted_summary(in_names[c], internal.col(c), w));
    out.natural.push_back(weighted_summary(nat_names[c], natural.col(c), w));
  }
  return out;
}

HyperSummary summarize_hyper(const Ensemble& ensemble, const LatentModel& model) {
  std::vector<HyperVector> thetas;
  for (const auto& ev : ensemble.evals) thetas.push_back(ev.theta);
  return summarize_hyper(thetas, ensemble.weights, model.kind(), model.n_variables(),
                         model.alpha_range());
}

// ---------------------------------------------------------------------------

double GaussianMixture::mean() const { return weights.dot(means) / weights.sum(); }

double GaussianMixture::variance() const {
  const double m = mean();
  double v = 0.0;
  for (Eigen::Index g = 0; g < weights.size(); ++g)
    v += weights[g] * (sds[g] * sds[g] + (means[g] - m) * (means[g] - m));
  return v / weights.sum();
}

Eigen::VectorXd mixture_draws(const GaussianMixture& mix, int n, std::uint64_t seed,
                              std::uint64_t stream) {
  if (n < 1) throw ValidationError("number of draws must be >= 1");
  const Eigen::Index G = mix.weights.size();
  if (G == 0 || mix.means.size() != G || mix.sds.size() != G)
    throw ValidationError("malformed Gaussian mixture");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  Rng rng(seq);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Eigen::VectorXd cum(G);
  const double wsum = mix.weights.sum();
  double acc = 0.0;
  for (Eigen::Index g = 0; g < G; ++g) cum[g] = (acc += mix.weights[g] / wsum);
  cum[G - 1] = 1.0;

  const boost::math::normal_distribution<double> normal;
  constexpr double kTiny = 1e-300;
  Eigen::VectorXd out(n);
  for (int s = 0; s < n; ++s) {
    const double u = (s + unif(rng)) / n;
    Eigen::Index g = 0;
    while (g + 1 < G && u > cum[g]) ++g;
    // Skip zero-weight components that share the boundary.
    while (g + 1 < G && mix.weights[g] <= 0.0) ++g;
    const double lo = g == 0 ? 0.0 : cum[g - 1];
    const double width = cum[g] - lo;
    double v = width > 0.0 ? (u - lo) / width : 0.5;
    v = std::clamp(v, kTiny, 1.0 - 1e-16);
    out[s] = mix.sds[g] > 0.0 ? mix.means[g] + mix.sds[g] * boost::math::quantile(normal, v)
                              : mix.means[g];
  }
  return out;
}

GaussianMixture predictor_mixture(const Ensemble& ensemble, int cell) {
  GaussianMixture m;
  const int G = ensemble.size();
  m.weights.resize(G);
  m.means.resize(G);
  m.sds.resize(G);
  int used = 0;
  for (int g = 0; g < G; ++g) {
    if (!(ensemble.weights[g] > 0.0)) continue;
    const LaplaceEval& ev = ensemble.evals[g];
    if (ev.eta_mean.size() == 0) throw InvalidState("ensemble point lacks predictor moments");
    m.weights[used] = ensemble.weights[g];
    m.means[used] = ev.eta_mean[cell];
    m.sds[used] = std::sqrt(ev.eta_var[cell]);
    ++used;
  }
  m.weights.conservativeResize(used);
  m.means.conservativeResize(used);
  m.sds.conservativeResize(used);
  return m;
}

LatentSummary summarize_latent(const Ensemble& ensemble, const Design& design, int I, int K,
                               int n_draws, std::uint64_t seed) {
  if (design.n_cells() != I * K) throw ValidationError("design does not match I x K");
  LatentSummary s;
  for (Eigen::MatrixXd* m : {&s.mean, &s.sd, &s.q025, &s.q50, &s.q975}) m->resize(I, K);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < I; ++i) {
      const int cell = k * I + i;
      const GaussianMixture mix = predictor_mixture(ensemble, cell);
      const double off = design.offset()[cell];
      const double wsum = mix.weights.sum();
      double m1 = 0.0, m2 = 0.0;
      for (Eigen::Index g = 0; g < mix.weights.size(); ++g) {
        const double mu = mix.means[g] - off;
        const double v = mix.sds[g] * mix.sds[g];
        m1 += mix.weights[g] * std::exp(mu + 0.5 * v);
        m2 += mix.weights[g] * std::exp(2.0 * mu + 2.0 * v);
      }
      m1 /= wsum;
      m2 /= wsum;
      s.mean(i, k) = m1;
      s.sd(i, k) = std::sqrt(std::max(0.0, m2 - m1 * m1));

      const Eigen::VectorXd d = mixture_draws(mix, n_draws, seed, static_cast<std::uint64_t>(cell));
      std::vector<double> v(d.data(), d.data() + d.size());
      std::sort(v.begin(), v.end());
      s.q025(i, k) = std::exp(sorted_quantile(v, 0.025) - off);
      s.q50(i, k) = std::exp(sorted_quantile(v, 0.5) - off);
      s.q975(i, k) = std::exp(sorted_quantile(v, 0.975) - off);
    }
  return s;
}

std::vector<ParamSummary> summarize_fixed(const Ensemble& ensemble,
                                          const std::vector<std::string>& names, int n_latent,
                                          int n_draws, std::uint64_t seed) {
  std::vector<ParamSummary> out;
  for (std::size_t f = 0; f < names.size(); ++f) {
    GaussianMixture mix;
    std::vector<double> w, m, sd;
    for (int g = 0; g < ensemble.size(); ++g) {
      if (!(ensemble.weights[g] > 0.0)) continue;
      const LaplaceEval& ev = ensemble.evals[g];
      if (ev.fixed_var.size() == 0) throw InvalidState("ensemble point lacks fixed-effect variances");
      w.push_back(ensemble.weights[g]);
      m.push_back(ev.mode[n_latent + static_cast<Eigen::Index>(f)]);
      sd.push_back(std::sqrt(ev.fixed_var[static_cast<Eigen::Index>(f)]));
    }
    mix.weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    mix.means = Eigen::Map<Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
    mix.sds = Eigen::Map<Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));

    ParamSummary s;
    s.name = names[f];
    s.mean = mix.mean();
    s.sd = std::sqrt(mix.variance());
    const Eigen::VectorXd d = mixture_draws(mix, n_draws, seed, (1ull << 40) + f);
    std::vector<double> v(d.data(), d.data() + d.size());
    std::sort(v.begin(), v.end());
    s.q025 = sorted_quantile(v, 0.025);
    s.q50 = sorted_quantile(v, 0.5);
    s.q975 = sorted_quantile(v, 0.975);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------

Criteria information_criteria(const Ensemble& ensemble, const CountData& data, int n_draws,
                              std::uint64_t seed) {
  const int I = data.n_regions();
  const int K = data.n_variables();
  double mean_dev = 0.0, dev_at_mean = 0.0, sat_loglik = 0.0;
  double lppd = 0.0, p_waic = 0.0;
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < I; ++i) {
      if (!data.present(i, k)) continue;
      const int cell = k * I + i;
      const double y = data.observed(i, k);
      const GaussianMixture mix = predictor_mixture(ensemble, cell);
      const Eigen::VectorXd d = mixture_draws(mix, n_draws, seed, static_cast<std::uint64_t>(cell));

      double dsum = 0.0, ll_mean = 0.0, ll_m2 = 0.0, ll_max = -std::numeric_limits<double>::infinity();
      Eigen::VectorXd ll(d.size());
      for (Eigen::Index s = 0; s < d.size(); ++s) {
        dsum += poisson_deviance(y, d[s]);
        ll[s] = poisson_log_pmf(y, d[s]);
        ll_max = std::max(ll_max, ll[s]);
        // Welford update for the variance of the pointwise log-likelihood.
        const double delta = ll[s] - ll_mean;
        ll_mean += delta / static_cast<double>(s + 1);
        ll_m2 += delta * (ll[s] - ll_mean);
      }
      const double n = static_cast<double>(d.size());
      mean_dev += dsum / n;
      dev_at_mean += poisson_deviance(y, mix.mean());
      sat_loglik += y > 0.0 ? poisson_log_pmf(y, std::log(y)) : 0.0;
      lppd += ll_max + std::log((ll.array() - ll_max).exp().sum() / n);
      p_waic += d.size() > 1 ? ll_m2 / (n - 1.0) : 0.0;
    }
  Criteria c;
  c.mean_deviance = mean_dev;
  c.dic.p_eff = mean_dev - dev_at_mean;
  c.dic.value = mean_dev + c.dic.p_eff;
  c.dic_full = c.dic.value - 2.0 * sat_loglik;
  c.waic.p_eff = p_waic;
  c.waic.value = -2.0 * (lppd - p_waic);
  return c;
}

Criterion dic(const Ensemble& ensemble, const CountData& data, int n_draws, std::uint64_t seed) {
  return information_criteria(ensemble, data, n_draws, seed).dic;
}

Criterion waic(const Ensemble& ensemble, const CountData& data, int n_draws, std::uint64_t seed) {
  return information_criteria(ensemble, data, n_draws, seed).waic;
}

}  // namespace mvcar
