#include "mvcar/mcmc.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "mvcar/errors.hpp"
#include "mvcar/parallel.hpp"

namespace mvcar {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Streaming per-cell accumulators for DIC and WAIC.
struct CellStats {
  std::vector<int> cells;
  std::vector<double> y;
  long long n = 0;
  Eigen::VectorXd dev_sum, eta_sum, ll_mean, ll_m2, lse_max, lse_sum;

  void init(const CountData& data) {
    for (int k = 0; k < data.n_variables(); ++k)
      for (int i = 0; i < data.n_regions(); ++i)
        if (data.present(i, k)) {
          cells.push_back(k * data.n_regions() + i);
          y.push_back(data.observed(i, k));
        }
    const auto m = static_cast<Eigen::Index>(cells.size());
    for (Eigen::VectorXd* v : {&dev_sum, &eta_sum, &ll_mean, &ll_m2, &lse_sum}) v->setZero(m);
    lse_max = Eigen::VectorXd::Constant(m, -kInf);
  }

  void add(const Eigen::VectorXd& eta) {
    ++n;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const double e = eta[cells[c]];
      const double ll = poisson_log_pmf(y[c], e);
      dev_sum[c] += poisson_deviance(y[c], e);
      eta_sum[c] += e;
      const double delta = ll - ll_mean[c];
      ll_mean[c] += delta / static_cast<double>(n);
      ll_m2[c] += delta * (ll - ll_mean[c]);
      if (ll > lse_max[c]) {
        lse_sum[c] = lse_sum[c] * std::exp(lse_max[c] - ll) + 1.0;
        lse_max[c] = ll;
      } else {
        lse_sum[c] += std::exp(ll - lse_max[c]);
      }
    }
  }

  void merge(const CellStats& o) {
    if (o.n == 0) return;
    if (n == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n), nb = static_cast<double>(o.n), nt = na + nb;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      dev_sum[c] += o.dev_sum[c];
      eta_sum[c] += o.eta_sum[c];
      const double delta = o.ll_mean[c] - ll_mean[c];
      ll_m2[c] += o.ll_m2[c] + delta * delta * na * nb / nt;
      ll_mean[c] += delta * nb / nt;
      const double m = std::max(lse_max[c], o.lse_max[c]);
      lse_sum[c] = lse_sum[c] * std::exp(lse_max[c] - m) + o.lse_sum[c] * std::exp(o.lse_max[c] - m);
      lse_max[c] = m;
    }
    n += o.n;
  }

  Criteria finish() const {
    Criteria out;
    if (n == 0) return out;
    const double nd = static_cast<double>(n);
    double mean_dev = 0.0, dev_at_mean = 0.0, sat = 0.0, lppd = 0.0, p = 0.0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      mean_dev += dev_sum[c] / nd;
      dev_at_mean += poisson_deviance(y[c], eta_sum[c] / nd);
      sat += y[c] > 0.0 ? poisson_log_pmf(y[c], std::log(y[c])) : 0.0;
      lppd += lse_max[c] + std::log(lse_sum[c] / nd);
      p += n > 1 ? ll_m2[c] / (nd - 1.0) : 0.0;
    }
    out.mean_deviance = mean_dev;
    out.dic.p_eff = mean_dev - dev_at_mean;
    out.dic.value = mean_dev + out.dic.p_eff;
    out.dic_full = out.dic.value - 2.0 * sat;
    out.waic.p_eff = p;
    out.waic.value = -2.0 * (lppd - p);
    return out;
  }
};

struct ChainOutput {
  McmcChain chain;
  CellStats stats;
};

// log pi(theta, x | y) - log q(x | theta): the part of the acceptance ratio
// that belongs to one state.
double state_weight(const LaplaceProblem& problem, const LaplaceEval& ev, const Eigen::VectorXd& x) {
  try {
    return problem.log_joint(ev, x) - problem.log_approx(ev, x);
  } catch (const InvalidState&) {
    return -kInf;
  }
}

ChainOutput run_chain(const LaplaceProblem& problem, const HyperVector& theta_init,
                      const Eigen::MatrixXd& chol, const McmcOptions& o, int chain,
                      const CountData* data) {
  std::seed_seq seq{static_cast<std::uint32_t>(o.seed), static_cast<std::uint32_t>(o.seed >> 32),
                    static_cast<std::uint32_t>(chain), 0x6d636d63u};
  Rng rng(seq);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto p = theta_init.size();

  ChainOutput out;
  if (data && o.criteria) out.stats.init(*data);

  LaplaceEval cur = problem.evaluate(theta_init);
  if (!cur.ok()) throw InvalidState("MCMC start point was rejected: " + cur.failure);
  Eigen::VectorXd x = problem.draw_latent(cur, rng);
  double cur_w = state_weight(problem, cur, x);
  for (int tries = 0; !std::isfinite(cur_w) && tries < 100; ++tries) {
    x = problem.draw_latent(cur, rng);
    cur_w = state_weight(problem, cur, x);
  }
  if (!std::isfinite(cur_w)) throw InvalidState("could not initialise the latent field for MCMC");

  double log_scale = std::log(2.38 / std::sqrt(static_cast<double>(p)));
  const int kept = std::max(0, o.iterations - o.burnin);
  out.chain.samples.resize(kept, p);
  long long accepted = 0;

  for (int t = 0; t < o.iterations; ++t) {
    const Eigen::VectorXd z = standard_normal(p, rng);
    const HyperVector prop(Eigen::VectorXd(cur.theta.values() + std::exp(log_scale) * (chol * z)));
    const double log_u = std::log(unif(rng));
    double accept_prob = 0.0;
    LaplaceEval ev = problem.evaluate(prop, &cur.mode);
    if (ev.ok()) {
      const Eigen::VectorXd xp = problem.draw_latent(ev, rng);
      const double w = state_weight(problem, ev, xp);
      const double log_r = w - cur_w;
      if (std::isfinite(w)) accept_prob = log_r >= 0.0 ? 1.0 : std::exp(log_r);
      if (std::isfinite(w) && log_u < log_r) {
        cur = std::move(ev);
        x = xp;
        cur_w = w;
        if (t >= o.burnin) ++accepted;
      }
    }
    if (t < o.burnin) {
      log_scale += std::pow(t + 1.0, -0.6) * (accept_prob - o.target_accept);
    } else {
      out.chain.samples.row(t - o.burnin) = cur.theta.values().transpose();
      if (data && o.criteria) out.stats.add(problem.design().apply(x));
    }
  }
  out.chain.acceptance = kept > 0 ? static_cast<double>(accepted) / kept : 0.0;
  out.chain.final_scale = std::exp(log_scale);
  return out;
}

}  // namespace

McmcResult mcmc_fit(const LaplaceProblem& problem, const HyperVector& theta_init,
                    const Eigen::MatrixXd& proposal_cov, const McmcOptions& o,
                    const CountData* data) {
  const Eigen::Index p = problem.model().theta_dim();
  if (theta_init.size() != p) throw ValidationError("MCMC start point has the wrong length");
  if (proposal_cov.rows() != p || proposal_cov.cols() != p)
    throw ValidationError("proposal covariance has the wrong shape");
  if (o.iterations < 1 || o.burnin < 0 || o.burnin >= o.iterations || o.chains < 1)
    throw ValidationError("MCMC needs iterations > burn-in >= 0 and at least one chain");
  if (!(o.target_accept > 0.0 && o.target_accept < 1.0))
    throw ValidationError("target acceptance must be in (0, 1)");
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (proposal_cov + proposal_cov.transpose()));
  if (llt.info() != Eigen::Success) throw ValidationError("proposal covariance is not PD");
  const Eigen::MatrixXd chol = llt.matrixL();

  std::vector<ChainOutput> outs(o.chains);
  parallel_for(o.chains, o.threads,
               [&](int c) { outs[c] = run_chain(problem, theta_init, chol, o, c, data); });

  McmcResult res;
  const Eigen::Index kept = o.iterations - o.burnin;
  Eigen::MatrixXd all(kept * o.chains, p);
  CellStats pooled;
  for (int c = 0; c < o.chains; ++c) {
    all.middleRows(c * kept, kept) = outs[c].chain.samples;
    if (c == 0) pooled = outs[c].stats;
    else pooled.merge(outs[c].stats);
    res.chains.push_back(std::move(outs[c].chain));
  }
  res.mean = all.colwise().mean().transpose();
  res.sd = ((all.rowwise() - res.mean.transpose()).array().square().colwise().sum() /
            std::max<double>(1.0, static_cast<double>(all.rows() - 1)))
               .sqrt()
               .transpose();
  if (data && o.criteria) res.criteria = pooled.finish();
  return res;
}

}  // namespace mvcar
