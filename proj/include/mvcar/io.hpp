#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "mvcar/fit.hpp"
#include "mvcar/likelihood_model.hpp"
#include "mvcar/mv_latent.hpp"

namespace mvcar {

using Json = nlohmann::ordered_json;

/// Reads the count CSV
///
///     region,variable,observed,expected[,cov_<name>...]
///
/// Regions are 1-based ids in [1, n_regions]; variables are labels ordered
/// by first appearance. Missing (region, variable) rows become absent cells.
/// Empty or "NA" covariate fields are missing values. Throws ParseError with
/// the line number for malformed rows and ValidationError for inconsistent
/// content.
CountData load_count_data(const std::filesystem::path& path, int n_regions);
CountData parse_count_data(std::istream& in, int n_regions);

/// Writes the same CSV format (absent cells are skipped).
void write_count_data(std::ostream& out, const CountData& data);

/// Serializes JSON with every floating-point number printed with 17
/// significant digits and non-finite values as null. Arrays of scalars stay
/// on one line.
std::string dump_json(const Json& j);

Json fit_to_json(const FitResult& result, bool include_timing = false);

/// Natural-scale hyperparameter summaries and the between-variable
/// covariance recomputed from the ensemble stored in a fit result. When
/// given, `kind` and `range` must match the stored ones.
Json transform_fit(const nlohmann::json& fit, std::optional<ModelKind> kind = std::nullopt,
                   std::optional<AlphaRange> range = std::nullopt);

/// Hyperparameters for simulation, either {"theta": [...]} on the internal
/// scale or natural fields {"variances", "correlations", "alpha", "M"}
/// (M given as a list of rows).
HyperVector params_from_json(const nlohmann::json& params, const LatentModel& model);

/// Flat key = value configuration; '#' starts a comment, blank lines are
/// ignored. Throws ParseError with the line number.
std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in);
std::vector<std::pair<std::string, std::string>> load_config(const std::filesystem::path& path);

}  // namespace mvcar
