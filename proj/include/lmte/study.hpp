#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lmte/fit.hpp"
#include "lmte/simulate.hpp"

namespace lmte {

struct StudyConfig {
  StudyDesign design{std::vector<int>{1}};
  ParameterSet truth;
  EmigrationFamily family = EmigrationFamily::Markovian;
  Scenario scenario = Scenario::BM;
  Aggregation aggregation = Aggregation::Occasion;
  int replicates = 100;
  std::uint64_t seed = 1;
  /// Replicates fitted concurrently; each fit then runs single-threaded.
  int threads = 1;
  FitOptions fit;
  std::vector<ModelSpec> models;
};

/// Checks the invariants of a study configuration, throwing InputError.
void validate(const StudyConfig& config);

ObservedLayout study_layout(const StudyConfig& config);

struct ReplicateFit {
  int replicate = 0;
  std::string model;
  bool converged = false;
  bool failed = false;  // fit threw; `message` holds the reason
  std::string message;
  double loglik = 0.0;
  double aic = 0.0;
  int nparams = 0;
  std::vector<Estimate> estimates;
};

struct ParameterSummary {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double cic = 0.0;  // percent of intervals covering the truth
  double ciw = 0.0;  // mean interval width
  int estimates = 0;
  int intervals = 0;
};

struct ModelSummary {
  std::string model;
  std::string label;
  int used = 0;      // converged replicates
  int excluded = 0;  // failed or unconverged
  std::vector<ParameterSummary> parameters;

  const ParameterSummary* find(const std::string& name) const;
};

struct StudySummary {
  int replicates = 0;
  std::uint64_t seed = 0;
  std::vector<ModelSummary> models;
  /// Replicate-major, models in configuration order.
  std::vector<ReplicateFit> fits;
  std::vector<std::int64_t> marked_totals;

  const ModelSummary* find(const std::string& model) const;
};

/// Data for replicate `index` of a study; independent of thread count.
SimulatedDataset simulate_replicate(const StudyConfig& config, int index);

/// Summaries over converged replicates of a set of per-replicate fits.
ModelSummary summarize(const ModelSpec& model, const std::vector<ReplicateFit>& fits,
                       const std::vector<NamedValue>& truth);

using StudyProgress = std::function<void(const ReplicateFit&)>;

/// Simulates every replicate, fits each model, and folds the outcomes in
/// replicate order. Failed fits are recorded and excluded.
StudySummary run_study(const StudyConfig& config, const StudyProgress& progress = {});

}  // namespace lmte
