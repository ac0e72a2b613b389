#include "mvcar/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mvcar/ensemble.hpp"
#include "mvcar/errors.hpp"

namespace mvcar {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_real(const std::string& s, const char* what, int line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ParseError(std::string("invalid ") + what + " '" + s + "'", line);
  return v;
}

int parse_int(const std::string& s, const char* what, int line) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ParseError(std::string("invalid ") + what + " '" + s + "'", line);
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

CountData load_count_data(const std::filesystem::path& path, int n_regions) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open data file '" + path.string() + "'");
  return parse_count_data(in, n_regions);
}

CountData parse_count_data(std::istream& in, int n_regions) {
  if (n_regions < 1) throw ValidationError("number of regions must be >= 1");
  std::string line;
  int lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) {
      header = split_csv(line);
      break;
    }
  }
  if (header.empty()) throw ValidationError("data file is empty");
  if (header.size() < 4 || header[0] != "region" || header[1] != "variable" ||
      header[2] != "observed" || header[3] != "expected")
    throw ParseError("header must start with region,variable,observed,expected", lineno);

  CountData d;
  for (std::size_t c = 4; c < header.size(); ++c) {
    if (header[c].rfind("cov_", 0) != 0 || header[c].size() == 4)
      throw ParseError("extra column '" + header[c] + "' must be named cov_<name>", lineno);
    d.covariate_names.push_back(header[c].substr(4));
  }

  struct Row {
    int region;
    int variable;
    double observed;
    double expected;
    std::vector<double> cov;
  };
  std::vector<Row> rows;
  std::map<std::string, int> var_index;
  std::map<std::pair<int, int>, int> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(f.size()),
                       lineno);
    Row r;
    r.region = parse_int(f[0], "region id", lineno);
    if (r.region < 1 || r.region > n_regions)
      throw ValidationError("line " + std::to_string(lineno) + ": region id " +
                            std::to_string(r.region) + " outside 1.." + std::to_string(n_regions));
    if (f[1].empty()) throw ParseError("empty variable label", lineno);
    auto [it, inserted] = var_index.try_emplace(f[1], static_cast<int>(d.variable_labels.size()));
    if (inserted) d.variable_labels.push_back(f[1]);
    r.variable = it->second;
    r.observed = parse_real(f[2], "observed count", lineno);
    r.expected = parse_real(f[3], "expected count", lineno);
    for (std::size_t c = 4; c < f.size(); ++c)
      r.cov.push_back(f[c].empty() || f[c] == "NA" ? std::nan("") : parse_real(f[c], "covariate", lineno));
    if (!seen.emplace(std::pair{r.region, r.variable}, lineno).second)
      throw ValidationError("line " + std::to_string(lineno) + ": duplicate row for region " +
                            std::to_string(r.region) + ", variable '" + f[1] + "'");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ValidationError("data file has no rows");

  const int K = static_cast<int>(d.variable_labels.size());
  const double nan = std::nan("");
  d.observed = Eigen::MatrixXd::Constant(n_regions, K, nan);
  d.expected = Eigen::MatrixXd::Constant(n_regions, K, nan);
  d.covariates.assign(d.covariate_names.size(), Eigen::MatrixXd::Constant(n_regions, K, nan));
  for (const Row& r : rows) {
    d.observed(r.region - 1, r.variable) = r.observed;
    d.expected(r.region - 1, r.variable) = r.expected;
    for (std::size_t c = 0; c < r.cov.size(); ++c) d.covariates[c](r.region - 1, r.variable) = r.cov[c];
  }
  d.validate();
  return d;
}

void write_count_data(std::ostream& out, const CountData& d) {
  out << "region,variable,observed,expected";
  for (const auto& n : d.covariate_names) out << ",cov_" << n;
  out << '\n';
  for (int k = 0; k < d.n_variables(); ++k)
    for (int i = 0; i < d.n_regions(); ++i) {
      if (!d.present(i, k)) continue;
      out << i + 1 << ','
          << (d.variable_labels.empty() ? std::to_string(k + 1) : d.variable_labels[k]) << ','
          << static_cast<long long>(d.observed(i, k)) << ',' << format_double(d.expected(i, k));
      for (const auto& c : d.covariates) out << ',' << format_double(c(i, k));
      out << '\n';
    }
}

// ---------------------------------------------------------------------------

namespace {

bool is_scalar(const Json& j) { return !j.is_array() && !j.is_object(); }

void write_json(std::string& out, const Json& j, int level) {
  const std::string pad(2 * (level + 1), ' ');
  const std::string close_pad(2 * level, ' ');
  switch (j.type()) {
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? format_double(v) : "null";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return is_scalar(e); });
      out += '[';
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += flat ? ", " : ",";
        if (!flat) out += "\n" + pad;
        write_json(out, e, level + 1);
        first = false;
      }
      if (!flat) out += "\n" + close_pad;
      out += ']';
      return;
    }
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) out += ',';
        out += "\n" + pad + Json(k).dump() + ": ";
        write_json(out, v, level + 1);
        first = false;
      }
      out += "\n" + close_pad + '}';
      return;
    }
    default:
      out += j.dump();
  }
}

Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json summaries_json(const std::vector<ParamSummary>& s) {
  Json a = Json::array();
  for (const auto& p : s)
    a.push_back(Json{{"name", p.name}, {"mean", p.mean}, {"sd", p.sd}, {"q025", p.q025},
                     {"q50", p.q50}, {"q975", p.q975}});
  return a;
}

Json criteria_json(const Criteria& c) {
  return Json{{"dic", c.dic.value},       {"p_dic", c.dic.p_eff},     {"dic_full", c.dic_full},
              {"mean_deviance", c.mean_deviance}, {"waic", c.waic.value}, {"p_waic", c.waic.p_eff}};
}

double json_real(const nlohmann::json& j) {
  return j.is_null() ? -std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace

std::string dump_json(const Json& j) {
  std::string out;
  write_json(out, j, 0);
  out += '\n';
  return out;
}

Json fit_to_json(const FitResult& r, bool include_timing) {
  Json j;
  const FitOptions& o = r.options;
  j["meta"] = Json{
      {"tool", "mvcar"},
      {"format_version", 1},
      {"model", std::string(model_name(r.kind))},
      {"n_regions", r.n_regions},
      {"n_variables", r.n_variables},
      {"variables", r.variable_labels},
      {"covariates", r.covariate_names},
      {"alpha_range", Json::array({r.alpha_range.min, r.alpha_range.max})},
      {"admissible", r.admissible ? Json::array({r.admissible->lower, r.admissible->upper}) : Json()},
      {"explore", std::string(explore_name(o.explore))},
      {"axis_delta", o.axis_delta},
      {"hessian_step", o.hessian_step},
      {"fixed_precision", o.fixed_precision},
      {"seed", o.seed},
      {"n_draws", o.n_draws},
      {"theta_init", vector_json(r.theta_init.values())},
  };
  j["hyper_internal"] = summaries_json(r.hyper.internal);
  j["hyper_natural"] = summaries_json(r.hyper.natural);
  j["between_cov"] = matrix_json(r.hyper.between_cov_mean);
  j["fixed"] = summaries_json(r.fixed);

  Json fitted = Json::array();
  for (int k = 0; k < r.n_variables; ++k)
    for (int i = 0; i < r.n_regions; ++i)
      fitted.push_back(Json{{"region", i + 1},
                            {"variable", r.variable_labels.empty() ? std::to_string(k + 1)
                                                                   : r.variable_labels[k]},
                            {"mean", r.fitted.mean(i, k)},
                            {"sd", r.fitted.sd(i, k)},
                            {"q025", r.fitted.q025(i, k)},
                            {"q50", r.fitted.q50(i, k)},
                            {"q975", r.fitted.q975(i, k)}});
  j["fitted"] = std::move(fitted);
  j["criteria"] = criteria_json(r.criteria);

  Json points = Json::array();
  for (int g = 0; g < r.ensemble.size(); ++g) {
    const LaplaceEval& ev = r.ensemble.evals[g];
    points.push_back(Json{{"theta", vector_json(ev.theta.values())},
                          {"log_post", ev.log_post},
                          {"weight", r.ensemble.weights[g]},
                          {"newton_iters", ev.newton_iters}});
  }
  j["ensemble"] = Json{{"names", r.internal_names}, {"points", std::move(points)}};
  j["optimizer"] = Json{{"theta_mode", vector_json(r.mode.theta.values())},
                        {"log_post", r.mode.log_post},
                        {"converged", r.mode.converged},
                        {"evaluations", r.mode.evaluations},
                        {"hessian", matrix_json(r.mode.raw_hessian)}};

  if (r.mcmc) {
    const McmcResult& m = *r.mcmc;
    Json chains = Json::array();
    for (const auto& c : m.chains)
      chains.push_back(Json{{"acceptance", c.acceptance}, {"scale", c.final_scale},
                            {"samples", c.samples.rows()}});
    Json summary = Json::array();
    for (std::size_t c = 0; c < r.internal_names.size(); ++c)
      summary.push_back(Json{{"name", r.internal_names[c]},
                             {"mean", m.mean[static_cast<Eigen::Index>(c)]},
                             {"sd", m.sd[static_cast<Eigen::Index>(c)]}});
    Json mj{{"iterations", r.options.mcmc->iterations},
            {"burnin", r.options.mcmc->burnin},
            {"seed", r.options.mcmc->seed},
            {"chains", std::move(chains)},
            {"hyper_internal", std::move(summary)}};
    if (m.criteria) mj["criteria"] = criteria_json(*m.criteria);
    j["mcmc"] = std::move(mj);
  }
  if (include_timing) {
    Json t;
    for (const auto& [name, secs] : r.timings) t[name] = secs;
    j["timing"] = std::move(t);
  }
  return j;
}

Json transform_fit(const nlohmann::json& fit, std::optional<ModelKind> kind,
                   std::optional<AlphaRange> range) {
  try {
    const auto& meta = fit.at("meta");
    const ModelKind stored = parse_model_kind(meta.at("model").get<std::string>());
    if (kind && *kind != stored)
      throw ValidationError("model kind '" + std::string(model_name(*kind)) +
                            "' does not match the stored result ('" +
                            std::string(model_name(stored)) + "')");
    const AlphaRange stored_range{meta.at("alpha_range").at(0).get<double>(),
                                  meta.at("alpha_range").at(1).get<double>()};
    if (range && (range->min != stored_range.min || range->max != stored_range.max))
      throw ValidationError("alpha range does not match the stored result");
    const int K = meta.at("n_variables").get<int>();

    std::vector<HyperVector> thetas;
    std::vector<double> lp;
    for (const auto& pt : fit.at("ensemble").at("points")) {
      std::vector<double> v;
      for (const auto& x : pt.at("theta")) v.push_back(x.get<double>());
      thetas.emplace_back(Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
      lp.push_back(json_real(pt.at("log_post")));
    }
    if (thetas.empty()) throw ValidationError("fit result has an empty ensemble");
    for (const auto& t : thetas)
      if (t.size() != theta_dim(stored, K))
        throw ValidationError("stored ensemble point has the wrong length for the model");
    const HyperSummary s = summarize_hyper(thetas, ensemble_weights(lp), stored, K, stored_range);

    Json out;
    out["meta"] = Json{{"tool", "mvcar"},
                       {"model", std::string(model_name(stored))},
                       {"n_variables", K},
                       {"variables", meta.at("variables")},
                       {"alpha_range", Json::array({stored_range.min, stored_range.max})},
                       {"ensemble_size", thetas.size()}};
    out["hyper_natural"] = summaries_json(s.natural);
    out["between_cov"] = matrix_json(s.between_cov_mean);
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed fit result: ") + e.what());
  }
}

HyperVector params_from_json(const nlohmann::json& p, const LatentModel& model) {
  const int K = model.n_variables();
  try {
    if (p.contains("theta")) {
      std::vector<double> v = p.at("theta").get<std::vector<double>>();
      if (static_cast<int>(v.size()) != model.theta_dim())
        throw ValidationError("'theta' has " + std::to_string(v.size()) + " entries, the model needs " +
                              std::to_string(model.theta_dim()));
      HyperVector t(Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
      to_natural(model, t);  // validates
      return t;
    }
    NaturalParams np;
    const int na = alpha_count(model.kind(), K);
    np.alpha.resize(0);
    if (p.contains("alpha")) {
      std::vector<double> a = p.at("alpha").is_array() ? p.at("alpha").get<std::vector<double>>()
                                                       : std::vector<double>{p.at("alpha").get<double>()};
      if (static_cast<int>(a.size()) == 1 && na > 1) a.assign(na, a[0]);
      np.alpha = Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
    }
    if (model.kind() == ModelKind::MModel) {
      const auto rows = p.at("M").get<std::vector<std::vector<double>>>();
      Eigen::MatrixXd m(K, K);
      if (static_cast<int>(rows.size()) != K) throw ValidationError("'M' must have K rows");
      for (int i = 0; i < K; ++i) {
        if (static_cast<int>(rows[i].size()) != K) throw ValidationError("'M' must have K columns");
        for (int j = 0; j < K; ++j) m(i, j) = rows[i][j];
      }
      np.M = m;
    } else {
      std::vector<double> v = p.at("variances").get<std::vector<double>>();
      if (static_cast<int>(v.size()) != K) throw ValidationError("'variances' must have K entries");
      np.variances = Eigen::Map<Eigen::VectorXd>(v.data(), K);
      np.correlations = Eigen::MatrixXd::Identity(K, K);
      if (p.contains("correlations")) {
        const auto& c = p.at("correlations");
        if (c.is_number()) {
          for (int i = 0; i < K; ++i)
            for (int j = 0; j < K; ++j)
              if (i != j) np.correlations(i, j) = c.get<double>();
        } else {
          const auto rows = c.get<std::vector<std::vector<double>>>();
          if (static_cast<int>(rows.size()) != K) throw ValidationError("'correlations' must be K x K");
          for (int i = 0; i < K; ++i) {
            if (static_cast<int>(rows[i].size()) != K)
              throw ValidationError("'correlations' must be K x K");
            for (int j = 0; j < K; ++j) np.correlations(i, j) = rows[i][j];
          }
        }
      }
    }
    const HyperVector t = from_natural(model, np);
    to_natural(model, t);
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed parameter file: ") + e.what());
  }
}

std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", lineno);
    for (const auto& kv : out)
      if (kv.first == key) throw ParseError("duplicate key '" + key + "'", lineno);
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path.string() + "'");
  return parse_config(in);
}

}  // namespace mvcar
