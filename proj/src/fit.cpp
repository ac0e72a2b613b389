#include "mvcar/fit.hpp"

#include <chrono>
#include <random>

#include "mvcar/errors.hpp"

namespace mvcar {

HyperVector default_theta_init(const LatentModel& model) {
  const int K = model.n_variables();
  Eigen::VectorXd t = Eigen::VectorXd::Zero(model.theta_dim());
  const int na = alpha_count(model.kind(), K);
  if (model.kind() == ModelKind::MModel) {
    for (int k = 0; k < K; ++k) t[na + k * K + k] = 1.0;
  } else if (is_intrinsic(model.kind())) {
    t.segment(na, K).setOnes();
  }
  return HyperVector(std::move(t));
}

namespace {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace

FitResult fit(std::shared_ptr<const LatentModel> model, std::shared_ptr<const CountData> data,
              const FitOptions& options) {
  if (!model || !data) throw ValidationError("fit needs a model and data");
  data->validate();
  if (data->n_regions() != model->n_regions())
    throw ValidationError("data has " + std::to_string(data->n_regions()) +
                          " regions but the graph has " + std::to_string(model->n_regions()));
  if (data->n_variables() != model->n_variables())
    throw ValidationError("data has " + std::to_string(data->n_variables()) +
                          " variables but the model expects " +
                          std::to_string(model->n_variables()));
  if (options.n_draws < 1) throw ValidationError("number of draws must be >= 1");

  FitResult r;
  r.kind = model->kind();
  r.n_regions = model->n_regions();
  r.n_variables = model->n_variables();
  r.alpha_range = model->alpha_range();
  r.admissible = model->admissible();
  r.variable_labels = data->variable_labels;
  r.covariate_names = data->covariate_names;
  r.internal_names = model->internal_names();
  r.natural_names = model->natural_names();
  r.options = options;

  Stopwatch clock;
  LaplaceOptions lo;
  lo.fixed_precision = options.fixed_precision;
  const LaplaceProblem problem(model, build_design(*data), std::make_shared<PoissonLikelihood>(data),
                               lo);

  r.theta_init = options.theta_init ? *options.theta_init : default_theta_init(*model);
  OptimizerOptions oo;
  oo.hessian_step = options.hessian_step;
  oo.threads = options.threads;
  r.mode = optimize_hyper(problem, r.theta_init, oo);
  r.timings.emplace_back("optimize", clock.lap());

  r.ensemble = explore_ensemble(problem, r.mode, options.explore, options.axis_delta, options.threads);
  r.timings.emplace_back("explore", clock.lap());

  r.hyper = summarize_hyper(r.ensemble, *model);
  r.fixed = summarize_fixed(r.ensemble, fixed_effect_names(*data), problem.n_latent(),
                            options.n_draws, options.seed);
  r.fitted = summarize_latent(r.ensemble, problem.design(), r.n_regions, r.n_variables,
                              options.n_draws, options.seed);
  r.criteria = information_criteria(r.ensemble, *data, options.n_draws, options.seed);
  r.timings.emplace_back("summarize", clock.lap());

  if (options.mcmc) {
    const Eigen::MatrixXd cov = r.mode.hessian.llt().solve(
        Eigen::MatrixXd::Identity(r.mode.hessian.rows(), r.mode.hessian.cols()));
    McmcOptions mo = *options.mcmc;
    mo.threads = options.threads;
    r.mcmc = mcmc_fit(problem, r.mode.theta, cov, mo, data.get());
    r.timings.emplace_back("mcmc", clock.lap());
  }
  return r;
}

CountData simulate_data(const LatentModel& model, const HyperVector& theta,
                        const Eigen::MatrixXd& expected, const Eigen::VectorXd& intercepts,
                        std::uint64_t seed) {
  const int I = model.n_regions();
  const int K = model.n_variables();
  if (expected.rows() != I || expected.cols() != K)
    throw ValidationError("expected counts must be I x K");
  if (!(expected.array() > 0.0).all()) throw ValidationError("expected counts must be positive");
  if (intercepts.size() != K) throw ValidationError("one intercept per variable is required");

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  Rng rng(seq);
  const Eigen::MatrixXd effects = sample_effects(model, theta, rng);

  CountData d;
  d.observed.resize(I, K);
  d.expected = expected;
  for (int k = 0; k < K; ++k) {
    d.variable_labels.push_back(std::to_string(k + 1));
    for (int i = 0; i < I; ++i) {
      const double mu = expected(i, k) * std::exp(intercepts[k] + effects(i, k));
      std::poisson_distribution<long long> pois(mu);
      d.observed(i, k) = static_cast<double>(pois(rng));
    }
  }
  return d;
}

}  // namespace mvcar
