#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace lmte;
using namespace lmte::app;

namespace {

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--models", f.models, "Comma-separated model names (note, rand_t, rand_c, acbc, acbt, atbc, atbt, all)");
  cmd->add_option("--sigma-p", f.sigma_p, "Penalty scale on the logit scale (default 2.5)")->check(CLI::PositiveNumber);
  cmd->add_option("--restarts", f.restarts, "Optimizer starts per model (default 10)")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "Master seed; generated and logged when omitted");
  cmd->add_option("--threads", f.threads, "Worker threads (fallback: LMTE_THREADS, then 1)")->check(CLI::PositiveNumber);
  cmd->add_option("--format", f.format, "Output files: json, csv or both (default both)")
      ->check(CLI::IsMember({"json", "csv", "both"}));
  cmd->add_option("--out", f.out, "Output directory (default .)");
  cmd->add_option("--aggregation", f.aggregation, "Batch-marking aggregation: occasion or period")
      ->check(CLI::IsMember({"occasion", "period"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent multinomial temporary emigration models for capture-recapture data"};
  app.require_subcommand(1);

  CommonFlags fit_flags, sim_flags, study_flags, mantella_flags, verify_flags;
  std::string dataset, sim_config, study_config;
  std::optional<std::string> fit_config, mantella_data;
  std::optional<int> datasets, replicates;
  VerifyOptions verify;

  auto* fit_cmd = app.add_subcommand("fit", "Fit models to a dataset file");
  fit_cmd->add_option("dataset", dataset, "Dataset JSON file")->required();
  fit_cmd->add_option("--config", fit_config, "Run configuration JSON file");
  add_common(fit_cmd, fit_flags);

  auto* sim_cmd = app.add_subcommand("simulate", "Write simulated datasets and the true-parameter sidecar");
  sim_cmd->add_option("config", sim_config, "Simulation configuration JSON file")->required();
  sim_cmd->add_option("--datasets", datasets, "Number of datasets (overrides the config)")->check(CLI::PositiveNumber);
  add_common(sim_cmd, sim_flags);

  auto* study_cmd = app.add_subcommand("study", "Run a simulation study and summarize coverage");
  study_cmd->add_option("config", study_config, "Study configuration JSON file")->required();
  study_cmd->add_option("--replicates", replicates, "Replicates (overrides the config)")->check(CLI::PositiveNumber);
  add_common(study_cmd, study_flags);

  auto* mantella_cmd = app.add_subcommand("mantella", "Fit the six models to the golden mantella data");
  mantella_cmd->add_option("--data", mantella_data, "Occasion-level dataset replacing the embedded counts");
  add_common(mantella_cmd, mantella_flags);

  auto* verify_cmd = app.add_subcommand("verify", "Cross-check the likelihood against brute-force and Monte Carlo oracles");
  verify_cmd->add_option("--occasions", verify.occasions, "Secondary occasions per period, e.g. 1,1");
  verify_cmd->add_option("--family", verify.family, "Emigration family: none, random or markovian");
  verify_cmd->add_option("--N", verify.N, "Superpopulation size");
  verify_cmd->add_option("--draws", verify.draws, "Monte Carlo draws per layout")->check(CLI::Range(10000ull, 100000000ull));
  add_common(verify_cmd, verify_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*fit_cmd) return cmd_fit(dataset, fit_config, fit_flags, std::cout, std::cerr);
    if (*sim_cmd) return cmd_simulate(sim_config, sim_flags, datasets, std::cout, std::cerr);
    if (*study_cmd) return cmd_study(study_config, study_flags, replicates, std::cout, std::cerr);
    if (*mantella_cmd) return cmd_mantella(mantella_data, mantella_flags, std::cout, std::cerr);
    if (*verify_cmd) return cmd_verify(verify, verify_flags, std::cout, std::cerr);
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const EvaluationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
