#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <fmt/format.h>

#include "app.hpp"
#include "commands.hpp"
#include "lmte/simulate.hpp"

using namespace lmte;
using namespace lmte::app;
namespace fs = std::filesystem;

namespace {

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / fmt::format("lmte_io_{}_{}", name, std::random_device{}());
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const int status = std::system(fmt::format("{} {} > /dev/null 2>&1", LMTE_CLI, args).c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ObservedData sample(const StudyDesign& d, const ObservedLayout& L, EmigrationFamily fam) {
  auto rng = make_stream(5, 0);
  const auto th = uniform_parameters(d, fam, 300, 0.5, 0.8, 0.4, 0.3, 0.6);
  return simulate_dataset(300, th, fam, d, L, rng).data;
}

}  // namespace

TEST_CASE("datasets round-trip through JSON") {
  const StudyDesign d({2, 1, 3});
  for (const auto& L : {ObservedLayout::batch(d, Aggregation::Occasion), ObservedLayout::batch(d, Aggregation::Period),
                        ObservedLayout::individual(d)}) {
    DatasetFile f{"round trip", "test", sample(d, L, EmigrationFamily::Markovian)};
    const auto back = dataset_from_json(parse_json(dump(dataset_to_json(f)), "mem"), "mem");
    CHECK(back.name == f.name);
    CHECK(back.data.y == f.data.y);
    CHECK(back.data.layout.scenario() == L.scenario());
    CHECK(back.data.layout.aggregation() == L.aggregation());
    CHECK(back.data.design().occasions_per_period() == d.occasions_per_period());
  }
}

TEST_CASE("syntax errors report line and column") {
  const auto msg = message_of([] { parse_json("{\n  \"design\": {\"occasions\": [1, 2]},\n  \"x\": ]\n}", "data.json"); });
  CHECK(msg.rfind("data.json:3:", 0) == 0);
}

TEST_CASE("field errors name the offending field") {
  const std::string base = R"({"design": {"occasions": [2, 2]}, "scenario": {"marking": "BM", "aggregation": "period"},
    "counts": {"m": [10, 5], "n": [3, 2, %s]}})";
  auto with = [&](const std::string& v) {
    auto s = base;
    s.replace(s.find("%s"), 2, v);
    return parse_json(s, "f.json");
  };
  CHECK(message_of([&] { dataset_from_json(with("1"), "f.json"); }).empty());
  CHECK(message_of([&] { dataset_from_json(with("-1"), "f.json"); }).find("field 'counts.n[2]'") != std::string::npos);
  CHECK(message_of([&] { dataset_from_json(with("1.5"), "f.json"); }).find("counts.n[2]") != std::string::npos);
  CHECK(message_of([&] { dataset_from_json(with("1, 4"), "f.json"); }).find("counts.n") != std::string::npos);
  const auto bad_design = parse_json(R"({"design": {"occasions": [1, 0]}, "scenario": {"marking": "BM"}, "counts": {}})", "g");
  CHECK(message_of([&] { dataset_from_json(bad_design, "g"); }).find("design.occasions[1]") != std::string::npos);
  const auto bad_history =
      parse_json(R"({"design": {"occasions": [1, 1]}, "scenario": {"marking": "ID"}, "counts": {"histories": {"012": 3}}})", "h");
  CHECK(message_of([&] { dataset_from_json(bad_history, "h"); }).find("counts.histories.012") != std::string::npos);
}

TEST_CASE("occasion counts aggregate to period counts") {
  const StudyDesign d({2, 3, 1});
  const auto occ = sample(d, ObservedLayout::batch(d, Aggregation::Occasion), EmigrationFamily::None);
  const auto per = aggregate_to_period(occ);
  CHECK(per.layout.aggregation() == Aggregation::Period);
  CHECK(per.marked_total() == occ.marked_total());
  std::int64_t a = 0, b = 0;
  for (auto v : occ.y) a += v;
  for (auto v : per.y) b += v;
  CHECK(a == b);
  CHECK_THROWS_AS(aggregate_to_period(sample(d, ObservedLayout::individual(d), EmigrationFamily::None)), InputError);
}

TEST_CASE("embedded mantella data has the published period totals") {
  const auto m = mantella_period_data();
  CHECK(m.data.design().occasions_per_period() == std::vector<int>{3, 3, 3, 4, 4, 4});
  CHECK(m.data.marked_total() == 2730.0);
  CHECK(m.data.layout.size() == 27);
}

TEST_CASE("model lists and model objects") {
  CHECK(models_from_list("all").size() == 6);
  CHECK(models_from_list("note,atbt").at(1).name == "atbt");
  CHECK_THROWS_AS(models_from_list("bogus"), InputError);
  CHECK_THROWS_AS(models_from_list(","), InputError);
  const auto m = model_from_json(parse_json(R"({"family": "markovian", "alpha": "c", "beta": "t"})", "m"), "models[0]");
  CHECK(m.name == "acbt");
  CHECK(model_from_json(model_to_json(m), "x").name == "acbt");
  CHECK(message_of([] { model_from_json(parse_json(R"({"alpha": "x"})", "m"), "models[0]"); }).find("models[0].alpha") !=
        std::string::npos);
}

TEST_CASE("truth accepts broadcast scalars and gamma vectors") {
  const StudyDesign d({2, 2, 2});
  const auto t = truth_from_json(parse_json(R"({"N": 100, "gamma": [0.5, 0.25, 0.25], "phi": 0.9, "p": 0.4,
    "alpha": [0.1, 0.2], "beta": 0.7})", "t"), d, EmigrationFamily::Markovian, "truth");
  CHECK(t.p.size() == 6);
  CHECK(t.gamma()[0] == doctest::Approx(0.5));
  CHECK(t.alpha[1] == doctest::Approx(0.2));
  CHECK_THROWS_AS(truth_from_json(parse_json(R"({"N": 100, "gamma": [0.5, 0.2, 0.2], "phi": 0.9, "p": 0.4,
    "alpha": 0.1, "beta": 0.7})", "t"), d, EmigrationFamily::Markovian, "truth"), InputError);
  CHECK_THROWS_AS(truth_from_json(parse_json(R"({"N": 100, "gamma_star": 0.5, "phi": [0.9], "p": 0.4})", "t"), d,
                                  EmigrationFamily::None, "truth"),
                  InputError);
}

TEST_CASE("run configurations are validated") {
  auto c = run_config_from_json(parse_json(R"({"models": ["note"], "restarts": 4, "format": "csv"})", "r"), "r");
  CHECK(c.restarts == 4);
  CHECK_NOTHROW(validate(c));
  c.format = "xml";
  CHECK_THROWS_AS(validate(c), InputError);
  c.format = "json";
  c.restarts = 0;
  CHECK_THROWS_AS(validate(c), InputError);
  CHECK(resolve_threads(3) == 3);
}

TEST_CASE("fit writes reports for a dataset file") {
  const auto dir = scratch("fit");
  const StudyDesign d({2, 2, 2});
  DatasetFile f{"small", "test", sample(d, ObservedLayout::batch(d, Aggregation::Occasion), EmigrationFamily::Markovian)};
  write_atomic((dir / "data.json").string(), dump(dataset_to_json(f)));
  CommonFlags flags;
  flags.models = "note,acbc";
  flags.restarts = 2;
  flags.seed = 3;
  flags.threads = 1;
  flags.out = (dir / "out").string();
  std::ostringstream out, log;
  const int code = cmd_fit((dir / "data.json").string(), std::nullopt, flags, out, log);
  CHECK((code == kExitOk || code == kExitConvergence));
  for (const char* name : {"fit_note.json", "fit_acbc.json", "comparison.json", "comparison.csv", "estimates.csv"}) {
    CHECK_MESSAGE(fs::exists(dir / "out" / name), name);
  }
  for (const char* name : {"fit_note.json", "fit_acbc.json"}) {
    const auto r = read_json_file((dir / "out" / name).string());
    const double aic = 2.0 * r["nparams"].get<double>() - 2.0 * r["loglik"].get<double>();
    CHECK(r["aic"].get<double>() == doctest::Approx(aic).epsilon(1e-12));
  }
  CHECK_NOTHROW(read_json_file((dir / "out" / "comparison.json").string()));
  fs::remove_all(dir);
}

TEST_CASE("simulated files parse back through the dataset reader") {
  const auto dir = scratch("sim");
  write_atomic((dir / "sim.json").string(), R"({"name": "rt", "design": {"occasions": [2, 1, 2]}, "family": "random",
    "scenario": {"marking": "ID"}, "truth": {"N": 200, "gamma_star": 0.4, "phi": 0.85, "p": 0.5, "alpha_prime": 0.3},
    "datasets": 2})");
  CommonFlags flags;
  flags.seed = 11;
  flags.out = (dir / "out").string();
  std::ostringstream out, log;
  REQUIRE(cmd_simulate((dir / "sim.json").string(), flags, std::nullopt, out, log) == kExitOk);
  int datasets = 0;
  for (const auto& e : fs::directory_iterator(dir / "out")) {
    const auto name = e.path().filename().string();
    if (name == "rt_truth.json") {
      CHECK_NOTHROW(read_json_file(e.path().string()));
    } else {
      const auto d = read_dataset(e.path().string());
      CHECK(d.data.layout.scenario() == Scenario::ID);
      CHECK(d.data.marked_total() <= 200.0);
      ++datasets;
    }
  }
  CHECK(datasets == 2);
  fs::remove_all(dir);
}

TEST_CASE("the command line maps failures to exit codes") {
  const auto dir = scratch("cli");
  CHECK(run_cli("--help") == kExitOk);
  CHECK(run_cli("fit") == kExitInput);
  CHECK(run_cli(fmt::format("fit {}", (dir / "missing.json").string())) == kExitInput);
  write_atomic((dir / "broken.json").string(), "{\"design\": ");
  CHECK(run_cli(fmt::format("fit {}", (dir / "broken.json").string())) == kExitInput);
  CHECK(run_cli("verify --occasions 1,1 --N 3 --draws 20000 --seed 1") == kExitOk);
  CHECK(run_cli("verify --occasions 2,2,2,2,2,2 --N 3") == kExitInput);
  fs::remove_all(dir);
}

TEST_CASE("shipped configurations load") {
  const std::string root = LMTE_SOURCE_DIR;
  CHECK_NOTHROW(validate(run_config_from_json(read_json_file(root + "/configs/run_all_models.json"), "run")));
  const auto sim = simulate_config_from_json(read_json_file(root + "/configs/simulate_six_periods.json"), "sim");
  CHECK(sim.design.periods() == 6);
  const auto study = study_config_from_json(read_json_file(root + "/configs/study_six_periods.json"), "study", nullptr, nullptr);
  CHECK_NOTHROW(validate(study));
  CHECK(study.replicates == 30);
  const auto back = study_config_from_json(parse_json(dump(study_config_to_json(study)), "rt"), "rt", nullptr, nullptr);
  CHECK(back.models.size() == study.models.size());
  CHECK(back.truth.phi == study.truth.phi);
}
