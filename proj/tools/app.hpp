#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lmte/fit.hpp"
#include "lmte/study.hpp"

namespace lmte::app {

using Json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitConvergence = 3;
inline constexpr int kExitVerification = 4;

// ---------------------------------------------------------------------------
// Files

/// Parses JSON text; syntax errors carry `origin:line:column`.
Json parse_json(const std::string& text, const std::string& origin);
Json read_json_file(const std::string& path);
std::string read_text_file(const std::string& path);

/// Writes through a temporary file in the same directory and renames it.
void write_atomic(const std::string& path, const std::string& content);
std::string dump(const Json& j);

// ---------------------------------------------------------------------------
// Datasets

struct DatasetFile {
  std::string name;
  std::string source;
  ObservedData data;
};

DatasetFile dataset_from_json(const Json& j, const std::string& origin);
Json dataset_to_json(const DatasetFile& d);
DatasetFile read_dataset(const std::string& path);

/// Sums occasion-level BM counts into period-level counts.
ObservedData aggregate_to_period(const ObservedData& data);

/// Period-level mantella counts, m totals followed by the upper-triangular
/// recapture matrix.
DatasetFile mantella_period_data();
/// Environment variable naming an occasion-level mantella dataset file.
inline constexpr const char* kMantellaOverrideEnv = "LMTE_MANTELLA_OCCASION_DATA";

// ---------------------------------------------------------------------------
// Configurations

ModelSpec model_from_json(const Json& j, const std::string& field);
Json model_to_json(const ModelSpec& m);
std::vector<ModelSpec> models_from_list(const std::string& comma_separated);

/// Probability groups may be a scalar (broadcast) or one value per entry;
/// entry is given either as `gamma` (K values) or `gamma_star` (K - 1).
ParameterSet truth_from_json(const Json& j, const StudyDesign& design, EmigrationFamily family,
                             const std::string& field);
Json truth_to_json(const ParameterSet& truth, EmigrationFamily family);

struct RunConfig {
  std::vector<ModelSpec> models;
  double sigma_p = kDefaultSigmaP;
  int restarts = 10;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string format = "both";
  std::string out = ".";
  std::optional<Aggregation> aggregation;
};

RunConfig run_config_from_json(const Json& j, const std::string& origin);
void validate(const RunConfig& c);

struct SimulateConfig {
  StudyDesign design{std::vector<int>{1}};
  EmigrationFamily family = EmigrationFamily::Markovian;
  ParameterSet truth;
  Scenario scenario = Scenario::BM;
  Aggregation aggregation = Aggregation::Occasion;
  int datasets = 1;
  std::optional<std::uint64_t> seed;
  std::string name = "simulated";
};

SimulateConfig simulate_config_from_json(const Json& j, const std::string& origin);

/// Study settings plus the shared run options (models, restarts, seed,
/// threads); seed and threads are returned separately when given.
StudyConfig study_config_from_json(const Json& j, const std::string& origin, std::optional<std::uint64_t>* seed,
                                   std::optional<int>* threads);
Json study_config_to_json(const StudyConfig& c);

/// Effective thread count: explicit value, then LMTE_THREADS, then 1.
int resolve_threads(std::optional<int> explicit_threads);

// ---------------------------------------------------------------------------
// Reports

Json fit_report(const FitResult& r);
/// Rows sorted by AIC.
Json comparison_report(const std::vector<FitResult>& fits);
std::string comparison_csv(const std::vector<FitResult>& fits);
std::string estimates_csv(const std::vector<FitResult>& fits);

Json study_report(const StudySummary& s, const StudyConfig& c);
std::string study_summary_csv(const StudySummary& s);
std::string study_replicates_csv(const StudySummary& s);

std::string format_number(double v);

}  // namespace lmte::app
