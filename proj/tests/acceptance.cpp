// Acceptance checks: one PASS/FAIL line per criterion.
//
//   acceptance 1 2 3      run the listed criteria
//   acceptance 5,6        criteria 5 and 6 share one simulation study

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include <fmt/format.h>

#include "commands.hpp"
#include "lmte/objective.hpp"
#include "lmte/oracle.hpp"
#include "lmte/simulate.hpp"
#include "lmte/study.hpp"
#include "support.hpp"

using namespace lmte;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

int worker_threads() {
  if (const char* env = std::getenv("LMTE_THREADS")) return std::max(1, std::atoi(env));
  return std::max(1u, std::thread::hardware_concurrency());
}

ObservedData simulated(const StudyDesign& d, const ObservedLayout& L, const ParameterSet& th, EmigrationFamily fam,
                       std::int64_t N, std::uint64_t seed) {
  auto rng = make_stream(seed, 0);
  return simulate_dataset(N, th, fam, d, L, rng).data;
}

std::vector<std::vector<int>> compositions(int total) {
  if (total == 0) return {{}};
  std::vector<std::vector<int>> out;
  for (int first = 1; first <= total; ++first) {
    for (auto rest : compositions(total - first)) {
      rest.insert(rest.begin(), first);
      out.push_back(rest);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Verdict criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  int designs = 0, mismatched = 0;
  for (int T = 1; T <= 8; ++T) {
    for (const auto& t : compositions(T)) {
      StudyDesign d(t);
      auto built = enumerate_valid_histories(d);
      std::sort(built.begin(), built.end());
      const std::set<LatentHistory> unique(built.begin(), built.end());
      if (bruteforce_valid_histories(d) != built || unique.size() != built.size() ||
          HistoryIndexer(d).count() != built.size()) {
        ++mismatched;
      }
      ++designs;
    }
  }
  const auto J = enumerate_valid_histories(StudyDesign({1, 1})).size();
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {mismatched == 0 && J == 10 && sec < 10.0,
          fmt::format("{} designs with T <= 8, {} mismatches; J(K=2,T=(1,1)) = {} (need 10); {:.1f} s (need < 10 s)",
                      designs, mismatched, J, sec)};
}

Verdict criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2002);
  double worst = 0.0, worst_dual = 0.0;
  int evaluations = 0;
  for (const auto& t : std::vector<std::vector<int>>{{2, 2, 2}, {1, 3, 2, 1}, {3, 3, 3, 4, 4, 4}}) {
    const StudyDesign d(t);
    const bool large = d.total_occasions() > 12;
    const auto L = ObservedLayout::batch(d, Aggregation::Occasion);
    std::vector<int> all(L.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    const TransferCgf dp(L, all);
    const std::vector<double> zero(all.size(), 0.0);
    for (auto fam : {EmigrationFamily::None, EmigrationFamily::CompletelyRandom, EmigrationFamily::Markovian}) {
      for (int r = 0; r < 50; ++r) {
        const auto th = testing::random_parameters(d, fam, rng, 1.0, 0.05, 0.95);
        const auto tr = build_transitions<double>(th, d, fam);
        // With N = 1, K(0) = log sum(pi).
        const double total_dp = std::exp(dp.evaluate<double>(tr, 1.0, zero, 0).value);
        worst = std::max(worst, std::abs(total_dp - 1.0));
        if (!large) {
          double total = 0.0;
          for (double v : probability_vector(d, th, fam)) total += v;
          worst = std::max(worst, std::abs(total - 1.0));
          worst_dual = std::max(worst_dual, std::abs(total - total_dp));
        }
        ++evaluations;
      }
    }
  }
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= 1e-10 && worst_dual <= 1e-10 && sec < 120.0,
          fmt::format("{} parameter sets on 3 designs incl. mantella (transfer backend): max |sum pi - 1| = {:.2e} "
                      "(need <= 1e-10), enumeration vs transfer {:.2e}; {:.1f} s",
                      evaluations, worst, worst_dual, sec)};
}

Verdict criterion3() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(3003);
  StudyDesign d({1, 1});
  const std::int64_t N = 5;
  double worst_residual = 0.0;
  int solved = 0, boundary = 0, unexpected = 0;
  std::vector<std::string> pmf_notes;
  for (auto layout : {ObservedLayout::batch(d, Aggregation::Period), ObservedLayout::individual(d)}) {
    const auto A = build_link_matrix(d, layout);
    const auto th = testing::random_parameters(d, EmigrationFamily::None, rng, static_cast<double>(N), 0.3, 0.7);
    const auto pi = probability_vector(d, th, EmigrationFamily::None);
    double worst_pmf = 0.0;
    int interior = 0;
    for (const auto& [y, prob] : exact_pmf_table(N, pi, A)) {
      if (std::all_of(y.begin(), y.end(), [](std::int64_t v) { return v == 0; })) continue;
      const ObservedData data(layout, y);
      const LikelihoodEngine engine(data, EmigrationFamily::None, th);
      try {
        SaddlepointSolution sol;
        const double ll = engine.saddlepoint_loglik(th, &sol);
        const double scale = std::max(1.0, engine.target().cwiseAbs().maxCoeff());
        worst_residual = std::max(worst_residual, (to_eigen(sol.at.grad) - engine.target()).cwiseAbs().maxCoeff() / scale);
        ++solved;
        if (!engine.adjusted()) {
          ++interior;
          worst_pmf = std::max(worst_pmf, std::abs(ll - std::log(prob)) / std::abs(std::log(prob)));
        }
      } catch (const EvaluationError&) {
        if (data.marked_total() == static_cast<double>(N)) {
          ++boundary;
        } else {
          ++unexpected;
        }
      }
    }
    pmf_notes.push_back(fmt::format("{} worst log-pmf rel. error {:.3f} over {} interior y", to_string(layout.scenario()),
                                    worst_pmf, interior));
  }

  // Maximizers on 20 simulated closed-population datasets (ID, N = 40).
  double worst_prob = 0.0, worst_N = 0.0;
  int fitted = 0;
  const auto model = closed_population(named_model("note"));
  const auto truth = uniform_parameters(d, EmigrationFamily::None, 40, 1.0, 1.0, 0.5, 0.0, 0.0);
  for (int r = 0; r < 20; ++r) {
    auto srng = make_stream(7, static_cast<std::uint64_t>(r));
    const auto ds = simulate_dataset(40, truth, EmigrationFamily::None, d, ObservedLayout::individual(d), srng);
    FitOptions o;
    o.restarts = 3;
    const auto sp = fit(ds.data, model, o);
    o.likelihood = LikelihoodKind::ExactID;
    const auto ex = fit(ds.data, model, o);
    if (!sp.convergence.converged || !ex.convergence.converged) continue;
    ++fitted;
    for (std::size_t i = 0; i < sp.reported.size(); ++i) {
      const auto& a = sp.reported[i];
      const auto& b = ex.reported[i];
      if (a.name == "N") {
        worst_N = std::max(worst_N, std::abs(a.value - b.value) / b.value);
      } else {
        worst_prob = std::max(worst_prob, std::abs(a.value - b.value));
      }
    }
  }
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = unexpected == 0 && worst_residual <= 1e-9 && fitted == 20 && worst_prob <= 1e-2 &&
                    worst_N <= 1e-2 && sec < 300.0;
  return {pass, fmt::format("N=5: {} solved, max relative residual {:.1e} (need <= 1e-9), {} all-marked y rejected, {} "
                            "unexpected failures; {}; {}; MLEs on {}/20 datasets: max |dp| = {:.1e}, max |dN|/N = "
                            "{:.1e} (need <= 1e-2); {:.0f} s",
                            solved, worst_residual, boundary, unexpected, pmf_notes[0], pmf_notes[1], fitted,
                            worst_prob, worst_N, sec)};
}

Verdict criterion4() {
  std::mt19937_64 rng(4004);
  StudyDesign d({2, 1, 2, 2});
  const auto L = ObservedLayout::batch(d, Aggregation::Occasion);
  double worst_none = 0.0, worst_random = 0.0, worst_inv = 0.0;
  for (int r = 0; r < 20; ++r) {
    for (auto fam : {EmigrationFamily::None, EmigrationFamily::CompletelyRandom}) {
      const auto th = testing::random_parameters(d, fam, rng, 80.0);
      const auto data = simulated(d, L, th, fam, 80, 100 + static_cast<std::uint64_t>(r));
      const auto mk = testing::as_markovian(th, fam);
      const LikelihoodEngine a(data, fam, th);
      const LikelihoodEngine b(data, EmigrationFamily::Markovian, mk);
      const double e = rel(a.saddlepoint_loglik(th), b.saddlepoint_loglik(mk));
      (fam == EmigrationFamily::None ? worst_none : worst_random) = std::max(fam == EmigrationFamily::None ? worst_none : worst_random, e);
    }
    for (auto fam : {EmigrationFamily::Markovian, EmigrationFamily::CompletelyRandom}) {
      const auto th = testing::random_parameters(d, fam, rng, 70.0, 0.2, 0.8);
      const auto data = simulated(d, L, th, fam, 70, 200 + static_cast<std::uint64_t>(r));
      const LikelihoodEngine engine(data, fam, th);
      const std::size_t f = th.phi.size() - 1;
      auto other = th;
      if (fam == EmigrationFamily::Markovian) {
        const double eta1 = th.phi[f] * (1.0 - th.alpha[f]);
        const double eta2 = th.phi[f] * th.beta[f - 1];
        other.phi[f] = std::max(eta1, eta2) + 0.5 * (1.0 - std::max(eta1, eta2));
        other.alpha[f] = 1.0 - eta1 / other.phi[f];
        other.beta[f - 1] = eta2 / other.phi[f];
      } else {
        const double eta = th.phi[f] * (1.0 - th.alpha_prime[f]);
        other.phi[f] = eta + 0.5 * (1.0 - eta);
        other.alpha_prime[f] = 1.0 - eta / other.phi[f];
      }
      worst_inv = std::max(worst_inv, rel(engine.saddlepoint_loglik(th), engine.saddlepoint_loglik(other)));
    }
  }
  return {worst_none <= 1e-12 && worst_random <= 1e-12 && worst_inv <= 1e-10,
          fmt::format("20 parameter sets each: NoTE vs Markovian(alpha=0) {:.1e}, random vs Markovian(alpha', 1-alpha') "
                      "{:.1e} (need <= 1e-12); invariance along final products {:.1e} (need <= 1e-10)",
                      worst_none, worst_random, worst_inv)};
}

std::pair<Verdict, Verdict> criteria5and6() {
  const auto t0 = std::chrono::steady_clock::now();
  StudyConfig c;
  c.design = StudyDesign(std::vector<int>(6, 2));
  c.family = EmigrationFamily::Markovian;
  c.truth = uniform_parameters(c.design, EmigrationFamily::Markovian, 5000, 0.0, 0.9, 0.4, 0.2, 0.7);
  c.truth.gamma_star = gamma_to_star(std::vector<double>(6, 1.0 / 6));
  c.scenario = Scenario::BM;
  c.aggregation = Aggregation::Occasion;
  c.replicates = 30;
  c.seed = 2024;
  c.threads = worker_threads();
  c.fit.restarts = 3;
  c.models = {named_model("atbt"), named_model("note")};
  const auto s = run_study(c);
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto* te = s.find("atbt");
  const auto* note = s.find("note");
  Verdict v5, v6;
  {
    bool pass = te->used >= 25;
    std::string d = fmt::format("alpha_t beta_t on {}/30 converged replicates: ", te->used);
    const double N = te->find("N")->mean;
    pass = pass && N >= 4900 && N <= 5100;
    d += fmt::format("mean N {:.1f} (need [4900, 5100])", N);
    for (int k = 1; k <= 4; ++k) {
      const auto* a = te->find(fmt::format("alpha[{}]", k));
      pass = pass && a->mean >= 0.13 && a->mean <= 0.27 && a->cic >= 85.0;
      d += fmt::format("; alpha[{}] {:.3f} CIC {:.0f}%", k, a->mean, a->cic);
    }
    d += " (need [0.13, 0.27], CIC >= 85%)";
    for (int k = 2; k <= 4; ++k) {
      const auto* b = te->find(fmt::format("beta[{}]", k));
      pass = pass && std::abs(b->mean - 0.7) <= 0.12;
      d += fmt::format("; beta[{}] {:.3f}", k, b->mean);
    }
    d += fmt::format(" (need 0.7 +- 0.12); eta1 {:.3f}, eta2 {:.3f}; {:.0f} s with {} restarts", te->find("eta1")->mean,
                     te->find("eta2")->mean, sec, c.fit.restarts);
    v5 = {pass, d};
  }
  {
    bool pass = note->used >= 25;
    std::string d = fmt::format("NoTE on {}/30 converged replicates: ", note->used);
    for (int k = 1; k <= 4; ++k) {
      const auto* p = note->find(fmt::format("phi[{}]", k));
      pass = pass && p->mean < 0.87;
      d += fmt::format("phi[{}] {:.3f}; ", k, p->mean);
    }
    const auto* N = note->find("N");
    pass = pass && N->cic < 85.0;
    d += fmt::format("(need < 0.87); N mean {:.1f}, CIC {:.0f}% (need < 85%)", N->mean, N->cic);
    v6 = {pass, d};
  }
  return {v5, v6};
}

Verdict criterion7() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = app::mantella_period_data().data;
  FitOptions o;
  o.restarts = 10;
  o.seed = 1;
  o.threads = worker_threads();
  std::map<std::string, FitResult> fits;
  for (const auto& name : named_model_list()) fits.emplace(name, fit(data, named_model(name), o));
  bool pass = true;
  std::string d = "period-level data:";
  for (const auto& [name, r] : fits) {
    pass = pass && r.convergence.converged;
    d += fmt::format(" {} {:.2f}", name, r.aic);
  }
  const double note = fits.at("note").aic;
  for (const auto& [name, r] : fits) {
    if (name != "note") pass = pass && r.aic < note;
  }
  d += " (every TE AIC below NoTE)";
  for (const char* name : {"acbt", "atbt"}) {
    const auto* b = fits.at(name).find("beta[2]");
    pass = pass && b->value <= 0.05;
    d += fmt::format("; {} beta[2] {:.4f} ({:.4f}, {:.4f})", name, b->value, b->lower, b->upper);
  }
  d += " (need <= 0.05)";
  const char* env = std::getenv(app::kMantellaOverrideEnv);
  if (env != nullptr && *env != '\0') {
    const auto occ = app::read_dataset(env).data;
    bool ok = true;
    for (const auto& ref : app::mantella_reference()) {
      const auto r = fit(occ, named_model(ref.model), o);
      const auto* N = r.find("N");
      ok = ok && std::abs(r.aic - ref.aic) <= 5.0 && N->value >= ref.lower && N->value <= ref.upper;
      d += fmt::format("; occasion-level {} AIC {:.2f} vs {:.2f}, N {:.0f}", ref.model, r.aic, ref.aic, N->value);
    }
    pass = pass && ok;
  } else {
    d += "; occasion-level comparison (AIC within 5, N in published CI) not evaluated: no occasion-level counts, "
         "set LMTE_MANTELLA_OCCASION_DATA";
  }
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  d += fmt::format("; {:.0f} s", sec);
  return {pass, d};
}

Verdict criterion8() {
  std::mt19937_64 rng(8008);
  double worst = 0.0;
  std::string worst_at;
  int points = 0;
  const StudyDesign batch_design({2, 2, 1, 2});
  const StudyDesign id_design({2, 1});
  const std::vector<ObservedLayout> layouts{ObservedLayout::batch(batch_design, Aggregation::Occasion),
                                            ObservedLayout::batch(batch_design, Aggregation::Period),
                                            ObservedLayout::individual(id_design)};
  for (const auto& name : {"note", "rand_t", "rand_c", "acbc", "acbt", "atbc", "atbt"}) {
    const auto model = named_model(name);
    const auto fam = model.emigration.family;
    for (int r = 0; r < 10; ++r) {
      const auto& L = layouts[static_cast<std::size_t>(r) % layouts.size()];
      const auto& d = L.scenario() == Scenario::ID ? id_design : batch_design;
      const auto truth = testing::random_parameters(d, fam, rng, 150.0, 0.25, 0.75);
      const auto data = simulated(d, L, truth, fam, 150, 800 + static_cast<std::uint64_t>(points));
      auto engine = std::make_shared<const LikelihoodEngine>(data, fam, truth);
      const Parametrization param(d, model, data.marked_total());
      const PenalizedObjective obj(engine, param);
      auto u = param.to_unconstrained(truth);
      for (auto& v : u) v += testing::uniform(rng, -0.3, 0.3);
      std::vector<double> g;
      obj.evaluate(u, &g);
      const auto chk = finite_difference_check([&](std::span<const double> x) { return obj.evaluate(x).objective; }, u, g);
      if (chk.max_relative_error > worst) {
        worst = chk.max_relative_error;
        worst_at = fmt::format("{} {}/{}", name, to_string(L.scenario()), to_string(L.aggregation()));
      }
      ++points;
    }
  }
  return {worst <= 1e-5, fmt::format("{} points over 7 models and 3 layouts (ID on T = 3): max relative error {:.2e} at {} (need <= 1e-5)",
                                     points, worst, worst_at)};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = app::read_text_file(e.path().string());
  }
  return out;
}

Verdict criterion9() {
  const fs::path root = fs::temp_directory_path() / fmt::format("lmte_acceptance_{}", std::random_device{}());
  fs::create_directories(root);
  const std::string sim_cfg = (root / "simulate.json").string();
  const std::string study_cfg = (root / "study.json").string();
  app::write_atomic(sim_cfg, R"({"name": "det", "design": {"occasions": [2, 2, 2, 2, 2, 2]}, "family": "markovian",
    "scenario": {"marking": "BM", "aggregation": "occasion"},
    "truth": {"N": 5000, "gamma_star": [0.16666666666666666, 0.2, 0.25, 0.3333333333333333, 0.5],
              "phi": 0.9, "p": 0.4, "alpha": 0.2, "beta": 0.7}, "datasets": 2})");
  app::write_atomic(study_cfg, R"({"design": {"occasions": [2, 2, 2]}, "family": "markovian",
    "scenario": {"marking": "BM", "aggregation": "occasion"},
    "truth": {"N": 400, "gamma": [0.5, 0.25, 0.25], "phi": 0.85, "p": 0.45, "alpha": 0.25, "beta": 0.6},
    "replicates": 3, "models": ["note", "acbc"], "restarts": 2})");
  std::vector<std::map<std::string, std::string>> runs;
  std::ostringstream sink;
  for (int run = 0; run < 2; ++run) {
    app::CommonFlags f;
    f.seed = 99;
    f.threads = 1;
    f.out = (root / fmt::format("run{}", run) / "simulate").string();
    if (app::cmd_simulate(sim_cfg, f, std::nullopt, sink, sink) != 0) return {false, "cmd_simulate failed"};
    f.out = (root / fmt::format("run{}", run) / "study").string();
    if (app::cmd_study(study_cfg, f, std::nullopt, sink, sink) != 0) return {false, "cmd_study failed"};
    runs.push_back(snapshot(root / fmt::format("run{}", run)));
  }
  fs::remove_all(root);
  const bool same = runs[0] == runs[1] && !runs[0].empty();
  return {same, fmt::format("two runs with seed 99 and --threads 1: {} files each, {}", runs[0].size(),
                            same ? "byte-identical" : "outputs differ")};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) {
    std::stringstream ss(argv[i]);
    std::string item;
    while (std::getline(ss, item, ',')) wanted.push_back(std::atoi(item.c_str()));
  }
  if (wanted.empty()) wanted = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  const std::map<int, std::string> names{{1, "oracle equivalence"},   {2, "probability normalization"},
                                         {3, "saddlepoint validity"}, {4, "reduction identities"},
                                         {5, "simulation recovery"},  {6, "NoTE misfit effect"},
                                         {7, "mantella period-level"}, {8, "gradient checks"},
                                         {9, "determinism"}};
  bool all = true;
  auto report = [&](int n, const Verdict& v) {
    std::cout << fmt::format("criterion {} {}: {}: {}\n", n, v.pass ? "PASS" : "FAIL", names.at(n), v.detail) << std::flush;
    all = all && v.pass;
  };
  auto guarded = [&](int n, const std::function<Verdict()>& f) {
    try {
      report(n, f());
    } catch (const std::exception& e) {
      report(n, {false, fmt::format("exception: {}", e.what())});
    }
  };
  const bool study = std::find(wanted.begin(), wanted.end(), 5) != wanted.end() ||
                     std::find(wanted.begin(), wanted.end(), 6) != wanted.end();
  std::optional<std::pair<Verdict, Verdict>> shared;
  for (int n : wanted) {
    switch (n) {
      case 1: guarded(1, criterion1); break;
      case 2: guarded(2, criterion2); break;
      case 3: guarded(3, criterion3); break;
      case 4: guarded(4, criterion4); break;
      case 5:
      case 6:
        if (study && !shared) {
          try {
            shared = criteria5and6();
          } catch (const std::exception& e) {
            const Verdict v{false, fmt::format("exception: {}", e.what())};
            shared = std::make_pair(v, v);
          }
        }
        report(n, n == 5 ? shared->first : shared->second);
        break;
      case 7: guarded(7, criterion7); break;
      case 8: guarded(8, criterion8); break;
      case 9: guarded(9, criterion9); break;
      default: std::cerr << "unknown criterion " << n << "\n"; return 2;
    }
  }
  return all ? 0 : 1;
}
