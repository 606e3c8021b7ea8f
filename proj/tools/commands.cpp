#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "lmte/oracle.hpp"
#include "lmte/simulate.hpp"

namespace lmte::app {

namespace {

namespace fs = std::filesystem;

struct Output {
  std::string dir = ".";
  bool json = true;
  bool csv = true;

  void write(const std::string& name, const std::string& content) const { write_atomic((fs::path(dir) / name).string(), content); }
};

Output make_output(const std::string& dir, const std::string& format) {
  if (format != "json" && format != "csv" && format != "both") {
    throw InputError(fmt::format("unknown format '{}' (expected json, csv or both)", format));
  }
  return Output{dir, format != "csv", format != "json"};
}

RunConfig merged_run_config(const std::optional<std::string>& config_path, const CommonFlags& flags) {
  RunConfig c;
  if (config_path) c = run_config_from_json(read_json_file(*config_path), *config_path);
  if (flags.models) c.models = models_from_list(*flags.models);
  if (c.models.empty()) {
    for (const auto& n : named_model_list()) c.models.push_back(named_model(n));
  }
  if (flags.sigma_p) c.sigma_p = *flags.sigma_p;
  if (flags.restarts) c.restarts = *flags.restarts;
  if (flags.seed) c.seed = flags.seed;
  if (flags.threads) c.threads = flags.threads;
  if (flags.format) c.format = *flags.format;
  if (flags.out) c.out = *flags.out;
  if (flags.aggregation) c.aggregation = aggregation_from_string(*flags.aggregation);
  validate(c);
  return c;
}

ObservedData apply_aggregation(const ObservedData& data, std::optional<Aggregation> aggregation) {
  if (!aggregation || data.layout.scenario() != Scenario::BM || data.layout.aggregation() == *aggregation) return data;
  if (*aggregation == Aggregation::Period) return aggregate_to_period(data);
  throw InputError("period-level counts cannot be split into occasion-level counts");
}

struct FitBatch {
  std::vector<FitResult> fits;
  std::vector<std::string> failures;
  bool all_converged = true;
};

FitBatch fit_models(const ObservedData& data, const RunConfig& c, std::uint64_t seed, int threads, std::ostream& log) {
  FitBatch batch;
  FitOptions opts;
  opts.sigma_p = c.sigma_p;
  opts.restarts = c.restarts;
  opts.seed = seed;
  opts.threads = threads;
  for (const auto& m : c.models) {
    try {
      auto r = fit(data, m, opts);
      if (!r.convergence.converged) {
        batch.all_converged = false;
        fmt::print(log, "warning: {} did not converge (||gradient||_inf = {:.3g})\n", m.name, r.convergence.gradient_norm);
      }
      for (const auto& d : r.diagnostics) fmt::print(log, "{}: {}\n", m.name, d);
      batch.fits.push_back(std::move(r));
    } catch (const ConvergenceError& e) {
      batch.all_converged = false;
      batch.failures.push_back(fmt::format("{}: {}", m.name, e.what()));
      fmt::print(log, "error: {}: {}\n", m.name, e.what());
    }
  }
  return batch;
}

void print_comparison(const std::vector<FitResult>& fits, std::ostream& out) {
  Json rows = comparison_report(fits);
  fmt::print(out, "{:<8} {:<16} {:>7} {:>12} {:>10} {:>8}  {}\n", "model", "label", "nparams", "loglik", "AIC", "dAIC",
             "N (95% CI)");
  for (const auto& r : rows) {
    const std::string N = r["N"].is_null() ? "-"
                          : r["N_lower"].is_null()
                              ? fmt::format("{:.0f}", r["N"].get<double>())
                              : fmt::format("{:.0f} ({:.0f}, {:.0f})", r["N"].get<double>(), r["N_lower"].get<double>(),
                                            r["N_upper"].get<double>());
    fmt::print(out, "{:<8} {:<16} {:>7} {:>12.3f} {:>10.2f} {:>8.2f}  {}{}\n", r["model"].get<std::string>(),
               r["label"].get<std::string>(), r["nparams"].get<int>(), r["loglik"].get<double>(),
               r["aic"].get<double>(), r["delta_aic"].get<double>(), N, r["converged"].get<bool>() ? "" : "  [not converged]");
  }
}

void write_fit_outputs(const Output& o, const FitBatch& batch, const std::string& prefix, const Json& extra) {
  if (o.json) {
    for (const auto& r : batch.fits) o.write(fmt::format("{}fit_{}.json", prefix, r.model.name), dump(fit_report(r)));
    Json j = extra;
    j["comparison"] = comparison_report(batch.fits);
    j["failures"] = batch.failures;
    o.write(prefix + "comparison.json", dump(j));
  }
  if (o.csv) {
    o.write(prefix + "comparison.csv", comparison_csv(batch.fits));
    o.write(prefix + "estimates.csv", estimates_csv(batch.fits));
  }
}

const FitResult* find_fit(const std::vector<FitResult>& fits, const std::string& model) {
  for (const auto& f : fits) {
    if (f.model.name == model) return &f;
  }
  return nullptr;
}

std::vector<int> parse_occasions(const std::string& s) {
  std::vector<int> t;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const long v = std::strtol(item.c_str(), &end, 10);
    if (item.empty() || *end != '\0' || v < 1) throw InputError(fmt::format("bad occasion count '{}' in '{}'", item, s));
    t.push_back(static_cast<int>(v));
  }
  if (t.empty()) throw InputError("the design needs at least one primary period");
  return t;
}

}  // namespace

std::uint64_t resolve_seed(std::optional<std::uint64_t> seed, std::ostream& log) {
  if (seed) return *seed;
  std::random_device rd;
  const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  fmt::print(log, "seed: {} (generated)\n", s);
  return s;
}

// ---------------------------------------------------------------------------

int cmd_fit(const std::string& dataset_path, const std::optional<std::string>& config_path, const CommonFlags& flags,
            std::ostream& out, std::ostream& log) {
  const auto c = merged_run_config(config_path, flags);
  const auto ds = read_dataset(dataset_path);
  const auto data = apply_aggregation(ds.data, c.aggregation);
  const auto output = make_output(c.out, c.format);
  const std::uint64_t seed = resolve_seed(c.seed, log);
  const auto batch = fit_models(data, c, seed, resolve_threads(c.threads), log);
  fmt::print(out, "dataset: {} ({} {}, marked {})\n", ds.name.empty() ? dataset_path : ds.name,
             to_string(data.layout.scenario()), to_string(data.layout.aggregation()), data.marked_total());
  print_comparison(batch.fits, out);
  Json extra;
  extra["dataset"] = ds.name;
  extra["seed"] = seed;
  extra["aggregation"] = to_string(data.layout.aggregation());
  write_fit_outputs(output, batch, "", extra);
  return batch.all_converged ? kExitOk : kExitConvergence;
}

int cmd_simulate(const std::string& config_path, const CommonFlags& flags, std::optional<int> datasets,
                 std::ostream& out, std::ostream& log) {
  auto c = simulate_config_from_json(read_json_file(config_path), config_path);
  if (flags.seed) c.seed = flags.seed;
  if (flags.aggregation) c.aggregation = aggregation_from_string(*flags.aggregation);
  if (datasets) c.datasets = *datasets;
  if (c.datasets < 1) throw InputError("at least one dataset is required");
  const std::uint64_t seed = resolve_seed(c.seed, log);
  const auto output = make_output(flags.out.value_or("."), "json");
  const auto layout = c.scenario == Scenario::ID ? ObservedLayout::individual(c.design)
                                                 : ObservedLayout::batch(c.design, c.aggregation);
  Json files = Json::array();
  for (int i = 0; i < c.datasets; ++i) {
    auto rng = make_stream(seed, static_cast<std::uint64_t>(i));
    const auto sim = simulate_dataset(static_cast<std::int64_t>(c.truth.N), c.truth, c.family, c.design, layout, rng);
    DatasetFile f;
    f.name = fmt::format("{}_{:03d}", c.name, i + 1);
    f.source = fmt::format("simulated, seed {}, replicate {}", seed, i + 1);
    f.data = sim.data;
    output.write(f.name + ".json", dump(dataset_to_json(f)));
    files.push_back(f.name + ".json");
    fmt::print(out, "{}.json: marked {}\n", f.name, f.data.marked_total());
  }
  Json truth;
  truth["family"] = to_string(c.family);
  truth["design"] = Json{{"occasions", c.design.occasions_per_period()}};
  truth["seed"] = seed;
  truth["truth"] = truth_to_json(c.truth, c.family);
  Json q = Json::object();
  for (const auto& v : Parametrization::truth_quantities(c.truth, c.design, c.family)) q[v.name] = v.value;
  truth["quantities"] = q;
  truth["datasets"] = files;
  output.write(c.name + "_truth.json", dump(truth));
  return kExitOk;
}

int cmd_study(const std::string& config_path, const CommonFlags& flags, std::optional<int> replicates,
              std::ostream& out, std::ostream& log) {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  auto c = study_config_from_json(read_json_file(config_path), config_path, &seed, &threads);
  if (flags.models) c.models = models_from_list(*flags.models);
  if (flags.sigma_p) c.fit.sigma_p = *flags.sigma_p;
  if (flags.restarts) c.fit.restarts = *flags.restarts;
  if (flags.seed) seed = flags.seed;
  if (flags.aggregation) c.aggregation = aggregation_from_string(*flags.aggregation);
  if (replicates) c.replicates = *replicates;
  c.threads = resolve_threads(flags.threads ? flags.threads : threads);
  c.seed = resolve_seed(seed, log);
  if (c.models.empty()) throw InputError("the study needs at least one model to fit");
  const auto output = make_output(flags.out.value_or("."), flags.format.value_or("both"));
  const auto summary = run_study(c, [&](const ReplicateFit& f) {
    fmt::print(log, "replicate {} {}: {}\n", f.replicate + 1, f.model,
               f.failed ? "failed: " + f.message : (f.converged ? "converged" : "not converged"));
  });
  for (const auto& m : summary.models) {
    fmt::print(out, "{} ({}): {} converged, {} excluded\n", m.label, m.model, m.used, m.excluded);
    fmt::print(out, "  {:<14} {:>9} {:>9} {:>7} {:>9}\n", "parameter", "truth", "mean", "CIC%", "CIW");
    for (const auto& p : m.parameters) {
      fmt::print(out, "  {:<14} {:>9.4g} {:>9.4g} {:>7.1f} {:>9.4g}\n", p.name, p.truth, p.mean, p.cic, p.ciw);
    }
  }
  if (output.json) output.write("study_summary.json", dump(study_report(summary, c)));
  if (output.csv) {
    output.write("study_summary.csv", study_summary_csv(summary));
    output.write("study_replicates.csv", study_replicates_csv(summary));
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

const std::vector<MantellaReference>& mantella_reference() {
  static const std::vector<MantellaReference> ref{
      {"atbt", 40, 710.21, 5232, 4728, 5863},   {"acbt", 37, 711.75, 5026, 4726, 5371},
      {"atbc", 38, 835.79, 4990, 4713, 5306},   {"acbc", 34, 836.05, 5038, 4775, 5336},
      {"rand_t", 36, 759.63, 5291, 4748, 5979}, {"note", 31, 1029.34, 5467, 5024, 5995},
  };
  return ref;
}

int cmd_mantella(const std::optional<std::string>& data_path, const CommonFlags& flags, std::ostream& out,
                 std::ostream& log) {
  auto c = merged_run_config(std::nullopt, flags);
  std::optional<std::string> override_path = data_path;
  if (!override_path) {
    if (const char* env = std::getenv(kMantellaOverrideEnv); env != nullptr && *env != '\0') override_path = env;
  }
  DatasetFile ds = override_path ? read_dataset(*override_path) : mantella_period_data();
  if (!(ds.data.design() == StudyDesign({3, 3, 3, 4, 4, 4})) || ds.data.layout.scenario() != Scenario::BM) {
    throw InputError("mantella data must be batch-marking counts on the design 3,3,3,4,4,4");
  }
  if (!override_path && c.aggregation == Aggregation::Occasion) {
    throw InputError(fmt::format("occasion-level fitting needs occasion-level data. {}", kMantellaNotice));
  }
  const auto data = apply_aggregation(ds.data, c.aggregation);
  const bool occasion_level = data.layout.aggregation() == Aggregation::Occasion;
  const auto output = make_output(c.out, c.format);
  const std::uint64_t seed = resolve_seed(c.seed, log);

  if (!occasion_level) fmt::print(out, "{}\n", kMantellaNotice);
  fmt::print(out, "data: {} ({}, marked {})\n", override_path ? *override_path : std::string("embedded"),
             to_string(data.layout.aggregation()), data.marked_total());
  const auto batch = fit_models(data, c, seed, resolve_threads(c.threads), log);
  print_comparison(batch.fits, out);

  // Table of AIC and N against the published occasion-level values.
  const FitResult* note = find_fit(batch.fits, "note");
  Json table = Json::array();
  std::string table_csv = "model,label,nparams,loglik,aic,N,N_lower,N_upper,reference_nparams,reference_aic,"
                          "reference_N,reference_lower,reference_upper,aic_below_note\n";
  bool reference_ok = true;
  for (const auto& ref : mantella_reference()) {
    const FitResult* r = find_fit(batch.fits, ref.model);
    if (r == nullptr) continue;
    const auto* N = r->find("N");
    const bool below = note != nullptr && r != note && r->aic < note->aic;
    Json row{{"model", r->model.name}, {"label", r->label},          {"nparams", r->nparams},
             {"loglik", r->loglik},    {"aic", r->aic},              {"N", N->value},
             {"N_lower", N->lower},    {"N_upper", N->upper},        {"reference_nparams", ref.nparams},
             {"reference_aic", ref.aic}, {"reference_N", ref.N},     {"reference_lower", ref.lower},
             {"reference_upper", ref.upper}};
    if (r != note) row["aic_below_note"] = below;
    if (occasion_level) {
      const bool aic_ok = std::abs(r->aic - ref.aic) <= 5.0;
      const bool n_ok = ref.lower <= N->value && N->value <= ref.upper;
      row["aic_within_5"] = aic_ok;
      row["N_within_reference_interval"] = n_ok;
      reference_ok = reference_ok && aic_ok && n_ok;
    }
    table.push_back(row);
    table_csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r->model.name, r->label, r->nparams,
                             format_number(r->loglik), format_number(r->aic), format_number(N->value),
                             format_number(N->lower), format_number(N->upper), ref.nparams, ref.aic, ref.N, ref.lower,
                             ref.upper, r == note ? "" : (below ? "1" : "0"));
  }

  // Emigration estimates of the two leading Markovian models.
  std::string emig_csv = "model,parameter,estimate,lower,upper\n";
  Json emig = Json::array();
  // Survival, entry and capture estimates per model.
  std::string phi_gamma_csv = "model,parameter,estimate,lower,upper\n";
  std::string p_csv = "model,parameter,estimate,lower,upper\n";
  for (const auto& r : batch.fits) {
    for (const auto& e : r.reported) {
      const std::string row = fmt::format("{},\"{}\",{},{},{}\n", r.model.name, e.name, format_number(e.value),
                                          e.interval ? format_number(e.lower) : "", e.interval ? format_number(e.upper) : "");
      if (e.name.rfind("alpha", 0) == 0 || e.name.rfind("beta", 0) == 0 || e.name.rfind("eta", 0) == 0) {
        if (r.model.name == "atbt" || r.model.name == "acbt") {
          emig_csv += row;
          emig.push_back(Json{{"model", r.model.name}, {"parameter", e.name}, {"estimate", e.value},
                              {"lower", e.lower}, {"upper", e.upper}});
        }
      } else if (e.name.rfind("phi", 0) == 0 || e.name.rfind("gamma", 0) == 0) {
        phi_gamma_csv += row;
      } else if (e.name.rfind("p[", 0) == 0) {
        p_csv += row;
      }
    }
  }

  // First-period capture probabilities across models, per occasion and as
  // the probability of at least one capture in the period.
  double spread = 0.0, detection_spread = 0.0;
  auto detection = [](const FitResult& r) {
    double miss = 1.0;
    for (const auto& e : r.reported) {
      if (e.name.rfind("p[1,", 0) == 0) miss *= 1.0 - e.value;
    }
    return 1.0 - miss;
  };
  for (const auto& a : batch.fits) {
    for (const auto& b : batch.fits) {
      detection_spread = std::max(detection_spread, std::abs(detection(a) - detection(b)));
      for (const auto& e : a.reported) {
        if (e.name.rfind("p[1,", 0) != 0) continue;
        if (const auto* f = b.find(e.name)) spread = std::max(spread, std::abs(e.value - f->value));
      }
    }
  }
  fmt::print(out, "first-period capture probabilities across models: largest difference {:.3g} per occasion, {:.3g} "
             "in the probability of at least one capture\n",
             spread, detection_spread);
  if (const auto* r = find_fit(batch.fits, "acbt")) {
    if (const auto* b = r->find("beta[2]")) fmt::print(out, "alpha_c beta_t: beta[2] = {:.4f} ({:.4f}, {:.4f})\n", b->value, b->lower, b->upper);
  }
  if (occasion_level) {
    fmt::print(out, "occasion-level reference check (AIC within 5, N inside the published interval): {}\n",
               reference_ok ? "pass" : "FAIL");
  }

  if (output.json) {
    Json j;
    j["notice"] = occasion_level ? Json("occasion-level data supplied; reference values are checked") : Json(kMantellaNotice);
    j["data"] = override_path ? *override_path : std::string("embedded");
    j["aggregation"] = to_string(data.layout.aggregation());
    j["seed"] = seed;
    j["models"] = table;
    j["emigration"] = emig;
    j["first_period_capture_spread"] = spread;
    j["first_period_detection_spread"] = detection_spread;
    if (occasion_level) j["reference_check"] = reference_ok;
    j["failures"] = batch.failures;
    output.write("mantella_report.json", dump(j));
    for (const auto& r : batch.fits) output.write(fmt::format("mantella_fit_{}.json", r.model.name), dump(fit_report(r)));
  }
  if (output.csv) {
    output.write("mantella_aic.csv", table_csv);
    output.write("mantella_emigration.csv", emig_csv);
    output.write("mantella_phi_gamma.csv", phi_gamma_csv);
    output.write("mantella_capture.csv", p_csv);
  }
  return batch.all_converged ? kExitOk : kExitConvergence;
}

// ---------------------------------------------------------------------------

int cmd_verify(const VerifyOptions& options, const CommonFlags& flags, std::ostream& out, std::ostream& log) {
  const StudyDesign design = validate_design(StudyDesign(parse_occasions(options.occasions)), family_from_string(options.family));
  const auto family = family_from_string(options.family);
  const OracleBudget budget;
  const HistoryIndexer indexer(design);
  if (indexer.count() > budget.max_histories) {
    throw BudgetError(fmt::format("design has {} latent histories; the oracle budget allows {}", indexer.count(),
                                  budget.max_histories));
  }
  if (options.N < 1 || options.N > budget.max_N) {
    throw BudgetError(fmt::format("N = {} is outside the oracle budget 1..{}", options.N, budget.max_N));
  }
  const std::uint64_t seed = resolve_seed(flags.seed, log);
  const int threads = resolve_threads(flags.threads);
  auto rng = make_stream(seed, 0);
  std::uniform_real_distribution<double> unif(0.3, 0.7);
  const auto K = static_cast<std::size_t>(design.periods());
  ParameterSet theta;
  theta.N = static_cast<double>(options.N);
  auto draw = [&](std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = unif(rng);
    return v;
  };
  theta.gamma_star = draw(K - 1);
  theta.phi = draw(K - 1);
  theta.p = draw(static_cast<std::size_t>(design.total_occasions()));
  if (family == EmigrationFamily::CompletelyRandom) theta.alpha_prime = draw(K - 1);
  if (family == EmigrationFamily::Markovian) {
    theta.alpha = draw(K - 1);
    theta.beta = draw(K >= 2 ? K - 2 : 0);
  }

  Json report;
  report["design"] = Json{{"occasions", design.occasions_per_period()}};
  report["family"] = to_string(family);
  report["N"] = options.N;
  report["seed"] = seed;
  report["theta"] = truth_to_json(theta, family);
  Json checks = Json::array();
  bool all_pass = true;
  auto check = [&](const std::string& name, bool pass, const std::string& detail) {
    fmt::print(out, "[{}] {}: {}\n", pass ? "pass" : "FAIL", name, detail);
    checks.push_back(Json{{"check", name}, {"pass", pass}, {"detail", detail}});
    all_pass = all_pass && pass;
  };

  auto built = enumerate_valid_histories(design);
  std::sort(built.begin(), built.end());
  const auto brute = bruteforce_valid_histories(design);
  check("enumeration", brute == built, fmt::format("{} constructive, {} brute force", built.size(), brute.size()));

  const auto pi = probability_vector(design, theta, family);
  double total = 0.0;
  for (double v : pi) total += v;
  check("normalization", std::abs(total - 1.0) <= 1e-10, fmt::format("sum pi = {:.15f}", total));

  std::vector<ObservedLayout> layouts{ObservedLayout::individual(design), ObservedLayout::batch(design, Aggregation::Occasion),
                                      ObservedLayout::batch(design, Aggregation::Period)};
  Json layout_reports = Json::array();
  for (std::size_t li = 0; li < layouts.size(); ++li) {
    const auto& L = layouts[li];
    const std::string tag = fmt::format("{}/{}", to_string(L.scenario()), to_string(L.aggregation()));
    const auto A = build_link_matrix(design, L);
    const auto table = exact_pmf_table(options.N, pi, A, budget);
    double sum = 0.0;
    for (const auto& [y, p] : table) sum += p;
    check(tag + " pmf total", std::abs(sum - 1.0) <= 1e-12, fmt::format("{} reachable y, total {:.15f}", table.size(), sum));

    int solved = 0, boundary = 0, unexpected = 0, adjusted = 0;
    double worst_residual = 0.0, worst_error = 0.0, worst_exact = 0.0;
    std::vector<std::int64_t> busiest;
    double busiest_p = -1.0;
    for (const auto& [y, p] : table) {
      if (std::all_of(y.begin(), y.end(), [](std::int64_t v) { return v == 0; })) continue;
      if (p > busiest_p) {
        busiest_p = p;
        busiest = y;
      }
      const ObservedData data(L, y);
      if (L.scenario() == Scenario::ID) {
        const double ex = log_likelihood_exact_id(data, theta, theta.N, design, family);
        worst_exact = std::max(worst_exact, std::abs(ex - std::log(p)) / std::max(1.0, std::abs(std::log(p))));
      }
      try {
        const LikelihoodEngine engine(data, family, theta);
        SaddlepointSolution sol;
        const double ll = engine.saddlepoint_loglik(theta, &sol);
        const double scale = std::max(1.0, engine.target().cwiseAbs().maxCoeff());
        worst_residual = std::max(worst_residual, (to_eigen(sol.at.grad) - engine.target()).cwiseAbs().maxCoeff() / scale);
        ++solved;
        if (engine.adjusted()) {
          ++adjusted;
        } else {
          worst_error = std::max(worst_error, std::abs(ll - std::log(p)) / std::abs(std::log(p)));
        }
      } catch (const EvaluationError&) {
        if (data.marked_total() == theta.N) {
          ++boundary;
        } else {
          ++unexpected;
        }
      }
    }
    check(tag + " saddlepoint residual", unexpected == 0 && worst_residual <= 1e-9,
          fmt::format("{} solved (max relative residual {:.2e}), {} rejected with every individual marked, {} "
                      "unexpected failures",
                      solved, worst_residual, boundary, unexpected));
    fmt::print(out, "       {} saddlepoint log-pmf: worst relative error {:.3g} over {} interior y ({} adjusted)\n",
               tag, worst_error, solved - adjusted, adjusted);
    if (L.scenario() == Scenario::ID) {
      check(tag + " exact likelihood", worst_exact <= 1e-10, fmt::format("max relative error {:.2e}", worst_exact));
    }
    const auto mc = mc_pmf_estimate(busiest, options.N, theta, family, design, L, options.draws,
                                    derive_seed(seed, li + 1), threads, budget);
    const double z = std::abs(mc.estimate - busiest_p) / mc.standard_error;
    check(tag + " Monte Carlo", z <= 3.0,
          fmt::format("most probable y: exact {:.6g}, MC {:.6g} +- {:.2g} ({:.2f} SE) from {} draws", busiest_p,
                      mc.estimate, mc.standard_error, z, mc.draws));
    layout_reports.push_back(Json{{"layout", tag},
                                  {"reachable", table.size()},
                                  {"solved", solved},
                                  {"adjusted", adjusted},
                                  {"boundary", boundary},
                                  {"worst_residual", worst_residual},
                                  {"worst_log_pmf_relative_error", worst_error}});
  }
  report["checks"] = checks;
  report["layouts"] = layout_reports;
  report["pass"] = all_pass;
  if (flags.out) write_atomic((fs::path(*flags.out) / "verify_report.json").string(), dump(report));
  fmt::print(out, "{}\n", all_pass ? "all checks passed" : "some checks FAILED");
  return all_pass ? kExitOk : kExitVerification;
}

}  // namespace lmte::app
