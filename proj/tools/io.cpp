#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "app.hpp"

namespace lmte::app {

namespace {

[[noreturn]] void field_error(const std::string& origin, const std::string& field, const std::string& what) {
  throw InputError(fmt::format("{}: field '{}': {}", origin, field, what));
}

const Json& require(const Json& j, const std::string& key, const std::string& origin, const std::string& parent) {
  const std::string field = parent.empty() ? key : parent + "." + key;
  if (!j.is_object()) field_error(origin, parent.empty() ? "<root>" : parent, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) field_error(origin, field, "missing");
  return *it;
}

template <class T>
T get_as(const Json& j, const std::string& origin, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    field_error(origin, field, fmt::format("unexpected value {}", j.dump()));
  }
}

std::int64_t get_count(const Json& j, const std::string& origin, const std::string& field) {
  if (!j.is_number_integer()) field_error(origin, field, fmt::format("expected an integer count, got {}", j.dump()));
  const auto v = j.get<std::int64_t>();
  if (v < 0) field_error(origin, field, fmt::format("negative count {}", v));
  return v;
}

std::vector<std::int64_t> get_counts(const Json& j, const std::string& origin, const std::string& field) {
  if (!j.is_array()) field_error(origin, field, "expected an array of counts");
  std::vector<std::int64_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_count(j[i], origin, fmt::format("{}[{}]", field, i)));
  return out;
}

StudyDesign design_from_json(const Json& j, const std::string& origin, const std::string& field) {
  const auto& occ = require(j, "occasions", origin, field);
  if (!occ.is_array() || occ.empty()) field_error(origin, field + ".occasions", "expected a non-empty array");
  std::vector<int> t;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    const auto f = fmt::format("{}.occasions[{}]", field, i);
    if (!occ[i].is_number_integer() || occ[i].get<int>() < 1) field_error(origin, f, "expected a positive integer");
    t.push_back(occ[i].get<int>());
  }
  return StudyDesign(t);
}

Json design_to_json(const StudyDesign& d) { return Json{{"occasions", d.occasions_per_period()}}; }

std::uint64_t get_seed(const Json& j, const std::string& origin, const std::string& field) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    field_error(origin, field, "expected a non-negative integer seed");
  }
  return j.get<std::uint64_t>();
}

std::vector<double> broadcast(const Json& j, std::size_t n, const std::string& origin, const std::string& field) {
  if (j.is_number()) return std::vector<double>(n, j.get<double>());
  if (!j.is_array()) field_error(origin, field, "expected a number or an array");
  if (j.size() != n) field_error(origin, field, fmt::format("expected {} values, got {}", n, j.size()));
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(get_as<double>(j[i], origin, fmt::format("{}[{}]", field, i)));
  return out;
}

}  // namespace

Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    const std::string what = e.what();
    const auto colon = what.find("parse error");
    throw InputError(fmt::format("{}:{}:{}: {}", origin, line, column, colon == std::string::npos ? what : what.substr(colon)));
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot read '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json_file(const std::string& path) { return parse_json(read_text_file(path), path); }

void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError(fmt::format("cannot write '{}'", tmp.string()));
    out << content;
    out.flush();
    if (!out) throw InputError(fmt::format("write to '{}' failed", tmp.string()));
  }
  fs::rename(tmp, target);
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------

DatasetFile dataset_from_json(const Json& j, const std::string& origin) {
  DatasetFile out;
  if (!j.is_object()) field_error(origin, "<root>", "expected an object");
  if (j.contains("name")) out.name = get_as<std::string>(j["name"], origin, "name");
  if (j.contains("source")) out.source = get_as<std::string>(j["source"], origin, "source");
  const auto design = design_from_json(require(j, "design", origin, ""), origin, "design");
  const auto& sc = require(j, "scenario", origin, "");
  Scenario scenario;
  Aggregation aggregation = Aggregation::Occasion;
  try {
    scenario = scenario_from_string(get_as<std::string>(require(sc, "marking", origin, "scenario"), origin, "scenario.marking"));
    if (sc.contains("aggregation")) {
      aggregation = aggregation_from_string(get_as<std::string>(sc["aggregation"], origin, "scenario.aggregation"));
    }
  } catch (const InputError& e) {
    if (std::string(e.what()).rfind(origin, 0) == 0) throw;
    field_error(origin, "scenario", e.what());
  }
  const auto& counts = require(j, "counts", origin, "");
  if (scenario == Scenario::ID) {
    const auto layout = ObservedLayout::individual(design);
    std::vector<std::int64_t> y(layout.size(), 0);
    const auto& h = require(counts, "histories", origin, "counts");
    if (!h.is_object()) field_error(origin, "counts.histories", "expected an object of history -> count");
    for (const auto& [key, value] : h.items()) {
      const auto field = fmt::format("counts.histories.{}", key);
      const int row = static_cast<int>(key.size()) == design.total_occasions() ? layout.find(key) : -1;
      if (row < 0) {
        field_error(origin, field, fmt::format("not a non-null capture history of length {}", design.total_occasions()));
      }
      y[static_cast<std::size_t>(row)] = get_count(value, origin, field);
    }
    out.data = ObservedData(layout, y);
  } else {
    const auto layout = ObservedLayout::batch(design, aggregation);
    auto m = get_counts(require(counts, "m", origin, "counts"), origin, "counts.m");
    auto n = get_counts(require(counts, "n", origin, "counts"), origin, "counts.n");
    const std::size_t mr = layout.first_capture_rows();
    if (m.size() != mr) field_error(origin, "counts.m", fmt::format("expected {} entries, got {}", mr, m.size()));
    if (n.size() != layout.size() - mr) {
      field_error(origin, "counts.n", fmt::format("expected {} entries, got {}", layout.size() - mr, n.size()));
    }
    m.insert(m.end(), n.begin(), n.end());
    out.data = ObservedData(layout, m);
  }
  return out;
}

Json dataset_to_json(const DatasetFile& d) {
  const auto& L = d.data.layout;
  Json j;
  j["name"] = d.name;
  j["source"] = d.source;
  j["design"] = design_to_json(d.data.design());
  j["scenario"] = Json{{"marking", to_string(L.scenario())}, {"aggregation", to_string(L.aggregation())}};
  Json counts;
  if (L.scenario() == Scenario::ID) {
    Json h = Json::object();
    for (std::size_t i = 0; i < L.size(); ++i) {
      if (d.data.y[i] != 0) h[L.label(i)] = d.data.y[i];
    }
    counts["histories"] = h;
  } else {
    const std::size_t mr = L.first_capture_rows();
    counts["m"] = std::vector<std::int64_t>(d.data.y.begin(), d.data.y.begin() + static_cast<std::ptrdiff_t>(mr));
    counts["n"] = std::vector<std::int64_t>(d.data.y.begin() + static_cast<std::ptrdiff_t>(mr), d.data.y.end());
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < L.size(); ++i) labels.push_back(L.label(i));
    counts["labels"] = labels;
  }
  j["counts"] = counts;
  return j;
}

DatasetFile read_dataset(const std::string& path) { return dataset_from_json(read_json_file(path), path); }

ObservedData aggregate_to_period(const ObservedData& data) {
  const auto& L = data.layout;
  if (L.scenario() != Scenario::BM) throw InputError("period-level aggregation applies to batch-marking data only");
  if (L.aggregation() == Aggregation::Period) return data;
  const auto P = ObservedLayout::batch(L.design(), Aggregation::Period);
  std::vector<std::int64_t> y(P.size(), 0);
  for (std::size_t i = 0; i < L.size(); ++i) {
    const auto& r = L.row(i);
    const std::string label = r.kind == RowId::Kind::FirstCapture
                                  ? fmt::format("m[{}]", r.period + 1)
                                  : fmt::format("n[{},{}]", r.mark_period + 1, r.period + 1);
    const int row = P.find(label);
    if (row < 0) throw InputError(fmt::format("no period-level row {} for {}", label, L.label(i)));
    y[static_cast<std::size_t>(row)] += data.y[i];
  }
  return ObservedData(P, y);
}

DatasetFile mantella_period_data() {
  DatasetFile d;
  d.name = "golden mantella";
  d.source = "period-level summaries: first-marking totals and recaptures by marking and recapture period";
  const StudyDesign design({3, 3, 3, 4, 4, 4});
  d.data = ObservedData(ObservedLayout::batch(design, Aggregation::Period),
                        {1090, 295, 115, 686, 403, 141,            // m
                         219, 55, 17, 255, 90, 15,                 // n[1, 1..6]
                         43, 42, 41, 62, 37,                       // n[2, 2..6]
                         35, 7, 2, 0,                              // n[3, 3..6]
                         174, 81, 30,                              // n[4, 4..6]
                         107, 13,                                  // n[5, 5..6]
                         1});                                      // n[6, 6]
  return d;
}

// ---------------------------------------------------------------------------

ModelSpec model_from_json(const Json& j, const std::string& field) {
  if (j.is_string()) return named_model(j.get<std::string>());
  if (!j.is_object()) throw InputError(fmt::format("field '{}': expected a model name or object", field));
  ModelSpec m;
  const std::string fam = j.value("family", std::string("markovian"));
  m.emigration.family = family_from_string(fam);
  auto tie = [&](const char* key) {
    const std::string v = j.value(key, std::string("t"));
    if (v == "t") return true;
    if (v == "c") return false;
    throw InputError(fmt::format("field '{}.{}': expected \"t\" or \"c\", got \"{}\"", field, key, v));
  };
  switch (m.emigration.family) {
    case EmigrationFamily::None: m.name = "note"; break;
    case EmigrationFamily::CompletelyRandom:
      m.emigration.alpha_time_varying = tie("alpha");
      m.name = m.emigration.alpha_time_varying ? "rand_t" : "rand_c";
      break;
    case EmigrationFamily::Markovian:
      m.emigration.alpha_time_varying = tie("alpha");
      m.emigration.beta_time_varying = tie("beta");
      m.name = fmt::format("a{}b{}", m.emigration.alpha_time_varying ? 't' : 'c', m.emigration.beta_time_varying ? 't' : 'c');
      break;
  }
  m = named_model(m.name);
  if (j.value("closed", false)) m = closed_population(m);
  if (j.contains("name")) m.name = j["name"].get<std::string>();
  return m;
}

Json model_to_json(const ModelSpec& m) {
  Json j;
  j["name"] = m.name;
  j["family"] = to_string(m.emigration.family);
  if (m.emigration.family != EmigrationFamily::None) j["alpha"] = m.emigration.alpha_time_varying ? "t" : "c";
  if (m.emigration.family == EmigrationFamily::Markovian) j["beta"] = m.emigration.beta_time_varying ? "t" : "c";
  j["closed"] = m.constraints.phi.tie == Tie::Fixed;
  return j;
}

std::vector<ModelSpec> models_from_list(const std::string& comma_separated) {
  std::vector<ModelSpec> out;
  std::stringstream ss(comma_separated);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item == "all") {
      for (const auto& n : named_model_list()) out.push_back(named_model(n));
    } else {
      out.push_back(named_model(item));
    }
  }
  if (out.empty()) throw InputError("the model list is empty");
  return out;
}

ParameterSet truth_from_json(const Json& j, const StudyDesign& design, EmigrationFamily family,
                             const std::string& field) {
  const std::size_t K = static_cast<std::size_t>(design.periods());
  ParameterSet t;
  const auto& N = require(j, "N", field, "");
  if (!N.is_number_integer() || N.get<std::int64_t>() < 1) field_error(field, "N", "expected a positive integer");
  t.N = static_cast<double>(N.get<std::int64_t>());
  if (j.contains("gamma_star")) {
    t.gamma_star = broadcast(j["gamma_star"], K - 1, field, "gamma_star");
  } else {
    const auto g = broadcast(require(j, "gamma", field, ""), K, field, "gamma");
    double total = 0.0;
    for (double v : g) total += v;
    if (std::abs(total - 1.0) > 1e-9) field_error(field, "gamma", fmt::format("entries sum to {}, not 1", total));
    t.gamma_star = gamma_to_star(g);
  }
  t.phi = broadcast(require(j, "phi", field, ""), K - 1, field, "phi");
  t.p = broadcast(require(j, "p", field, ""), static_cast<std::size_t>(design.total_occasions()), field, "p");
  if (family == EmigrationFamily::CompletelyRandom) {
    t.alpha_prime = broadcast(require(j, "alpha_prime", field, ""), K - 1, field, "alpha_prime");
  }
  if (family == EmigrationFamily::Markovian) {
    t.alpha = broadcast(require(j, "alpha", field, ""), K - 1, field, "alpha");
    t.beta = broadcast(require(j, "beta", field, ""), K >= 2 ? K - 2 : 0, field, "beta");
  }
  check_shape(t, design, family);
  return t;
}

Json truth_to_json(const ParameterSet& truth, EmigrationFamily family) {
  Json j;
  j["N"] = static_cast<std::int64_t>(truth.N);
  j["gamma"] = truth.gamma();
  j["phi"] = truth.phi;
  j["p"] = truth.p;
  if (family == EmigrationFamily::CompletelyRandom) j["alpha_prime"] = truth.alpha_prime;
  if (family == EmigrationFamily::Markovian) {
    j["alpha"] = truth.alpha;
    j["beta"] = truth.beta;
  }
  return j;
}

namespace {

void read_run_fields(const Json& j, const std::string& origin, RunConfig& c) {
  if (j.contains("models")) {
    const auto& m = j["models"];
    if (!m.is_array()) field_error(origin, "models", "expected an array");
    c.models.clear();
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto f = fmt::format("models[{}]", i);
      try {
        c.models.push_back(model_from_json(m[i], f));
      } catch (const InputError& e) {
        field_error(origin, f, e.what());
      }
    }
  }
  if (j.contains("sigma_p")) c.sigma_p = get_as<double>(j["sigma_p"], origin, "sigma_p");
  if (j.contains("restarts")) c.restarts = get_as<int>(j["restarts"], origin, "restarts");
  if (j.contains("seed")) c.seed = get_seed(j["seed"], origin, "seed");
  if (j.contains("threads")) c.threads = get_as<int>(j["threads"], origin, "threads");
  if (j.contains("format")) c.format = get_as<std::string>(j["format"], origin, "format");
  if (j.contains("out")) c.out = get_as<std::string>(j["out"], origin, "out");
  if (j.contains("aggregation")) {
    c.aggregation = aggregation_from_string(get_as<std::string>(j["aggregation"], origin, "aggregation"));
  }
}

}  // namespace

RunConfig run_config_from_json(const Json& j, const std::string& origin) {
  if (!j.is_object()) field_error(origin, "<root>", "expected an object");
  RunConfig c;
  read_run_fields(j, origin, c);
  return c;
}

void validate(const RunConfig& c) {
  if (c.models.empty()) throw InputError("at least one model is required");
  if (!(c.sigma_p > 0.0)) throw InputError("sigma_p must be positive");
  if (c.restarts < 1) throw InputError("restarts must be at least 1");
  if (c.threads && *c.threads < 1) throw InputError("threads must be at least 1");
  if (c.format != "json" && c.format != "csv" && c.format != "both") {
    throw InputError(fmt::format("unknown format '{}' (expected json, csv or both)", c.format));
  }
}

SimulateConfig simulate_config_from_json(const Json& j, const std::string& origin) {
  if (!j.is_object()) field_error(origin, "<root>", "expected an object");
  SimulateConfig c;
  c.design = design_from_json(require(j, "design", origin, ""), origin, "design");
  try {
    c.family = family_from_string(get_as<std::string>(require(j, "family", origin, ""), origin, "family"));
    c.design = validate_design(c.design, c.family);
    if (j.contains("scenario")) {
      const auto& sc = j["scenario"];
      c.scenario = scenario_from_string(get_as<std::string>(require(sc, "marking", origin, "scenario"), origin, "scenario.marking"));
      if (sc.contains("aggregation")) {
        c.aggregation = aggregation_from_string(get_as<std::string>(sc["aggregation"], origin, "scenario.aggregation"));
      }
    }
    c.truth = truth_from_json(require(j, "truth", origin, ""), c.design, c.family, origin + ": truth");
  } catch (const InputError& e) {
    if (std::string(e.what()).rfind(origin, 0) == 0) throw;
    throw InputError(fmt::format("{}: {}", origin, e.what()));
  }
  if (j.contains("datasets")) c.datasets = get_as<int>(j["datasets"], origin, "datasets");
  if (c.datasets < 1) field_error(origin, "datasets", "must be at least 1");
  if (j.contains("seed")) c.seed = get_seed(j["seed"], origin, "seed");
  if (j.contains("name")) c.name = get_as<std::string>(j["name"], origin, "name");
  return c;
}

StudyConfig study_config_from_json(const Json& j, const std::string& origin, std::optional<std::uint64_t>* seed,
                                   std::optional<int>* threads) {
  const auto sim = simulate_config_from_json(j, origin);
  StudyConfig c;
  c.design = sim.design;
  c.family = sim.family;
  c.truth = sim.truth;
  c.scenario = sim.scenario;
  c.aggregation = sim.aggregation;
  if (j.contains("replicates")) c.replicates = get_as<int>(j["replicates"], origin, "replicates");
  RunConfig run;
  run.models.clear();
  read_run_fields(j, origin, run);
  c.models = run.models;
  c.fit.sigma_p = run.sigma_p;
  c.fit.restarts = run.restarts;
  if (threads != nullptr) *threads = run.threads;
  if (seed != nullptr) *seed = run.seed;
  if (run.seed) c.seed = *run.seed;
  return c;
}

Json study_config_to_json(const StudyConfig& c) {
  Json j;
  j["design"] = design_to_json(c.design);
  j["family"] = to_string(c.family);
  j["scenario"] = Json{{"marking", to_string(c.scenario)}, {"aggregation", to_string(c.aggregation)}};
  j["truth"] = truth_to_json(c.truth, c.family);
  j["replicates"] = c.replicates;
  j["seed"] = c.seed;
  j["sigma_p"] = c.fit.sigma_p;
  j["restarts"] = c.fit.restarts;
  Json models = Json::array();
  for (const auto& m : c.models) models.push_back(model_to_json(m));
  j["models"] = models;
  return j;
}

int resolve_threads(std::optional<int> explicit_threads) {
  if (explicit_threads) return *explicit_threads;
  if (const char* env = std::getenv("LMTE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw InputError(fmt::format("LMTE_THREADS='{}' is not a positive integer", env));
    return static_cast<int>(v);
  }
  return 1;
}

}  // namespace lmte::app
