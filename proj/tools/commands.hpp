#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "app.hpp"

namespace lmte::app {

/// Flags shared by every command; unset values defer to the config file.
struct CommonFlags {
  std::optional<std::string> models;
  std::optional<double> sigma_p;
  std::optional<int> restarts;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> format;
  std::optional<std::string> out;
  std::optional<std::string> aggregation;
};

struct VerifyOptions {
  std::string occasions = "1,1";
  std::string family = "none";
  std::int64_t N = 5;
  std::uint64_t draws = 200000;
};

int cmd_fit(const std::string& dataset_path, const std::optional<std::string>& config_path, const CommonFlags& flags,
            std::ostream& out, std::ostream& log);
int cmd_simulate(const std::string& config_path, const CommonFlags& flags, std::optional<int> datasets,
                 std::ostream& out, std::ostream& log);
int cmd_study(const std::string& config_path, const CommonFlags& flags, std::optional<int> replicates,
              std::ostream& out, std::ostream& log);
int cmd_mantella(const std::optional<std::string>& data_path, const CommonFlags& flags, std::ostream& out,
                 std::ostream& log);
int cmd_verify(const VerifyOptions& options, const CommonFlags& flags, std::ostream& out, std::ostream& log);

/// Explicit seed, or a generated one that is logged.
std::uint64_t resolve_seed(std::optional<std::uint64_t> seed, std::ostream& log);

/// Published occasion-level mantella results for one model.
struct MantellaReference {
  const char* model;
  int nparams;
  double aic;
  double N;
  double lower;
  double upper;
};
const std::vector<MantellaReference>& mantella_reference();
inline constexpr const char* kMantellaNotice =
    "notice: the embedded mantella counts are period-level summaries. The published AIC values and "
    "N interval are reproducible only from occasion-level counts; supply those with --data or "
    "LMTE_MANTELLA_OCCASION_DATA.";

}  // namespace lmte::app
