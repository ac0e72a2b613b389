// mvcar: fit, simulate and inspect multivariate CAR disease-mapping models.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mvcar/areal_graph.hpp"
#include "mvcar/car_precision.hpp"
#include "mvcar/errors.hpp"
#include "mvcar/fit.hpp"
#include "mvcar/io.hpp"

namespace {

using namespace mvcar;

struct FitArgs {
  std::string adj, data, out, model = "pmcar", explore = "axis", theta_init;
  double alpha_min = 0.0, alpha_max = 1.0, hessian_step = 0.005, axis_delta = 1.0;
  double fixed_precision = 0.001;
  std::uint64_t seed = 42;
  int draws = 10000, threads = 1;
  bool timing = false;
  bool mcmc = false;
  int iters = 50000, burnin = 10000, chains = 2;
  std::uint64_t mcmc_seed = 1;
  std::string config;
};

struct SimulateArgs {
  std::string adj, model = "pmcar", params, out, intercepts;
  double alpha_min = 0.0, alpha_max = 1.0, expected = 50.0;
  int variables = 0;
  std::uint64_t seed = 1;
  std::string config;
};

struct TransformArgs {
  std::string fit, out, model;
  std::optional<double> alpha_min, alpha_max;
};

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ValidationError(std::string("invalid ") + what + " list '" + s + "'");
    }
  }
  return v;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ValidationError("failed writing '" + path + "'");
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

int run_fit(const FitArgs& a) {
  auto graph = std::make_shared<const ArealGraph>(load_edge_list(a.adj));
  auto data = std::make_shared<const CountData>(load_count_data(a.data, graph->n_regions()));
  LatentOptions lo;
  lo.alpha_range = {a.alpha_min, a.alpha_max};
  auto model = std::make_shared<const LatentModel>(parse_model_kind(a.model), data->n_variables(),
                                                   graph, lo);
  FitOptions fo;
  fo.explore = parse_explore_mode(a.explore);
  fo.axis_delta = a.axis_delta;
  fo.hessian_step = a.hessian_step;
  fo.seed = a.seed;
  fo.n_draws = a.draws;
  fo.threads = a.threads;
  fo.fixed_precision = a.fixed_precision;
  if (!a.theta_init.empty()) {
    const auto v = parse_list(a.theta_init, "theta-init");
    if (static_cast<int>(v.size()) != model->theta_dim())
      throw ValidationError("--theta-init has " + std::to_string(v.size()) +
                            " values, the model needs " + std::to_string(model->theta_dim()));
    fo.theta_init = HyperVector(Eigen::Map<const Eigen::VectorXd>(v.data(), model->theta_dim()));
  }
  if (a.mcmc) {
    McmcOptions mo;
    mo.iterations = a.iters;
    mo.burnin = a.burnin;
    mo.chains = a.chains;
    mo.seed = a.mcmc_seed;
    fo.mcmc = mo;
  }
  const FitResult r = fit(model, data, fo);
  write_text(a.out, dump_json(fit_to_json(r, a.timing)));
  return 0;
}

int infer_variables(const nlohmann::json& p, ModelKind kind) {
  if (p.contains("variances")) return static_cast<int>(p.at("variances").size());
  if (p.contains("M")) return static_cast<int>(p.at("M").size());
  if (p.contains("theta")) {
    const int n = static_cast<int>(p.at("theta").size());
    for (int K = 1; K <= 64; ++K)
      if (theta_dim(kind, K) == n) return K;
    throw ValidationError("'theta' length " + std::to_string(n) + " fits no number of variables");
  }
  throw ValidationError("parameter file needs 'theta', 'variances' or 'M'");
}

int run_simulate(const SimulateArgs& a) {
  auto graph = std::make_shared<const ArealGraph>(load_edge_list(a.adj));
  const ModelKind kind = parse_model_kind(a.model);
  const nlohmann::json p = read_json(a.params);
  const int K = a.variables > 0 ? a.variables : infer_variables(p, kind);
  LatentOptions lo;
  lo.alpha_range = {a.alpha_min, a.alpha_max};
  const LatentModel model(kind, K, graph, lo);
  const HyperVector theta = params_from_json(p, model);

  Eigen::VectorXd intercepts = Eigen::VectorXd::Zero(K);
  std::vector<double> iv;
  if (!a.intercepts.empty()) iv = parse_list(a.intercepts, "intercepts");
  else if (p.contains("intercepts")) iv = p.at("intercepts").get<std::vector<double>>();
  if (!iv.empty()) {
    if (static_cast<int>(iv.size()) != K)
      throw ValidationError("need " + std::to_string(K) + " intercepts, got " + std::to_string(iv.size()));
    intercepts = Eigen::Map<const Eigen::VectorXd>(iv.data(), K);
  }
  if (!(a.expected > 0.0)) throw ValidationError("--expected must be positive");
  const Eigen::MatrixXd e = Eigen::MatrixXd::Constant(graph->n_regions(), K, a.expected);
  const CountData d = simulate_data(model, theta, e, intercepts, a.seed);
  std::ostringstream out;
  write_count_data(out, d);
  write_text(a.out, out.str());
  return 0;
}

int run_bounds(const std::string& adj) {
  const ArealGraph g = load_edge_list(adj);
  const AlphaBounds b = alpha_bounds(g);
  std::cout << std::fixed << std::setprecision(8) << "(" << b.lower << ", " << b.upper << ")\n";
  return 0;
}

int run_transform(const TransformArgs& a) {
  const nlohmann::json fitj = read_json(a.fit);
  std::optional<ModelKind> kind;
  if (!a.model.empty()) kind = parse_model_kind(a.model);
  std::optional<AlphaRange> range;
  if (a.alpha_min || a.alpha_max) {
    const auto& stored = fitj.at("meta").at("alpha_range");
    range = AlphaRange{a.alpha_min.value_or(stored.at(0).get<double>()),
                       a.alpha_max.value_or(stored.at(1).get<double>())};
  }
  write_text(a.out, dump_json(transform_fit(fitj, kind, range)));
  return 0;
}

// Rewrites `sub --config FILE rest...` into `sub <config options> rest...`
// so that explicit flags, coming later, take precedence.
std::vector<std::string> expand_config(CLI::App& app, const std::vector<std::string>& args) {
  if (args.size() < 2) return args;
  CLI::App* sub = app.get_subcommand_no_throw(args[1]);
  if (sub == nullptr) return args;
  std::string config;
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
  }
  if (config.empty()) return args;

  std::vector<std::string> out{args[0], args[1]};
  for (const auto& [key, value] : load_config(config)) {
    const std::string name = "--" + key;
    const CLI::Option* opt = sub->get_option_no_throw(name);
    if (opt == nullptr || key == "config")
      throw ValidationError("unknown configuration key '" + key + "' in " + config);
    if (opt->get_expected_min() == 0) {
      if (value == "true" || value == "1" || value == "yes") out.push_back(name);
      else if (!(value == "false" || value == "0" || value == "no"))
        throw ValidationError("configuration key '" + key + "' expects true or false");
    } else {
      out.push_back(name);
      out.push_back(value);
    }
  }
  out.insert(out.end(), args.begin() + 2, args.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multivariate CAR models for areal count data"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model with the Laplace engine");
  fit_cmd->add_option("--adj", fa.adj, "Adjacency edge-list file")->required();
  fit_cmd->add_option("--data", fa.data, "Count data CSV")->required();
  fit_cmd->add_option("--model", fa.model, "indimcar, indpmcar, imcar, pmcar or mmodel");
  fit_cmd->add_option("--alpha-min", fa.alpha_min, "Lower end of the alpha range");
  fit_cmd->add_option("--alpha-max", fa.alpha_max, "Upper end of the alpha range");
  fit_cmd->add_option("--explore", fa.explore, "mode-only or axis");
  fit_cmd->add_option("--axis-delta", fa.axis_delta, "Axis step in posterior standard deviations");
  fit_cmd->add_option("--hessian-step", fa.hessian_step, "Finite-difference step for the Hessian");
  fit_cmd->add_option("--fixed-precision", fa.fixed_precision, "Prior precision of fixed effects");
  fit_cmd->add_option("--theta-init", fa.theta_init, "Comma-separated internal start values");
  fit_cmd->add_option("--seed", fa.seed, "Seed for summary draws");
  fit_cmd->add_option("--draws", fa.draws, "Draws per cell for quantiles, DIC and WAIC");
  fit_cmd->add_option("--threads", fa.threads, "Worker threads");
  fit_cmd->add_option("--out", fa.out, "Result file (default: stdout)");
  fit_cmd->add_flag("--timing", fa.timing, "Add a timing section to the result");
  fit_cmd->add_flag("--mcmc", fa.mcmc, "Also run the MCMC cross-validator");
  fit_cmd->add_option("--iters", fa.iters, "MCMC iterations per chain (burn-in included)");
  fit_cmd->add_option("--burnin", fa.burnin, "MCMC burn-in iterations");
  fit_cmd->add_option("--chains", fa.chains, "MCMC chains");
  fit_cmd->add_option("--mcmc-seed", fa.mcmc_seed, "MCMC seed");
  fit_cmd->add_option("--config", fa.config, "key=value configuration file (flags win)");

  SimulateArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate a count data set");
  sim_cmd->add_option("--adj", sa.adj, "Adjacency edge-list file")->required();
  sim_cmd->add_option("--model", sa.model, "Model kind");
  sim_cmd->add_option("--params", sa.params, "Parameter JSON file")->required();
  sim_cmd->add_option("--variables", sa.variables, "Number of variables (default: from params)");
  sim_cmd->add_option("--alpha-min", sa.alpha_min, "Lower end of the alpha range");
  sim_cmd->add_option("--alpha-max", sa.alpha_max, "Upper end of the alpha range");
  sim_cmd->add_option("--expected", sa.expected, "Expected count in every cell");
  sim_cmd->add_option("--intercepts", sa.intercepts, "Comma-separated intercepts a_k");
  sim_cmd->add_option("--seed", sa.seed, "Random seed");
  sim_cmd->add_option("--out", sa.out, "Output CSV (default: stdout)");
  sim_cmd->add_option("--config", sa.config, "key=value configuration file (flags win)");

  std::string bounds_adj;
  auto* bounds_cmd = app.add_subcommand("bounds", "Print the admissible alpha interval");
  bounds_cmd->add_option("--adj", bounds_adj, "Adjacency edge-list file")->required();

  TransformArgs ta;
  auto* tr_cmd = app.add_subcommand("transform", "Natural-scale summaries from a fit result");
  tr_cmd->add_option("--fit", ta.fit, "Result file written by 'fit'")->required();
  tr_cmd->add_option("--out", ta.out, "Output file (default: stdout)");
  tr_cmd->add_option("--model", ta.model, "Expected model kind (checked)");
  tr_cmd->add_option("--alpha-min", ta.alpha_min, "Expected alpha_min (checked)");
  tr_cmd->add_option("--alpha-max", ta.alpha_max, "Expected alpha_max (checked)");

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(app, args);
    std::vector<char*> cargs;
    for (auto& s : args) cargs.push_back(s.data());
    try {
      app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::ParseError& e) {
      return app.exit(e);
    }
    if (fit_cmd->parsed()) return run_fit(fa);
    if (sim_cmd->parsed()) return run_simulate(sa);
    if (bounds_cmd->parsed()) return run_bounds(bounds_adj);
    if (tr_cmd->parsed()) return run_transform(ta);
  } catch (const mvcar::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
