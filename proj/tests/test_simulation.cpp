#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>

#include "lmte/simulate.hpp"
#include "lmte/study.hpp"
#include "support.hpp"

using namespace lmte;

TEST_CASE("closed population histories stay in states 1 and 2") {
  StudyDesign d({2, 1, 3});
  auto th = uniform_parameters(d, EmigrationFamily::Markovian, 10.0, 1.0, 1.0, 0.4, 0.0, 0.5);
  auto rng = make_stream(4, 0);
  for (int i = 0; i < 2000; ++i) {
    const auto h = simulate_individual(th, EmigrationFamily::Markovian, d, rng);
    REQUIRE(is_valid_history(h, d));
    for (auto s : h.states) CHECK((s == 1 || s == 2));
  }
}

TEST_CASE("simulated histories are always valid") {
  std::mt19937_64 seeds(8);
  for (auto fam : {EmigrationFamily::None, EmigrationFamily::CompletelyRandom, EmigrationFamily::Markovian}) {
    StudyDesign d({2, 3, 1, 2});
    const auto th = testing::random_parameters(d, fam, seeds);
    auto rng = make_stream(9, static_cast<std::uint64_t>(fam));
    for (int i = 0; i < 5000; ++i) REQUIRE(is_valid_history(simulate_individual(th, fam, d, rng), d));
  }
}

TEST_CASE("empirical history frequencies match the probability vector") {
  std::mt19937_64 seeds(10);
  StudyDesign d({1, 1});
  const auto th = testing::random_parameters(d, EmigrationFamily::Markovian, seeds);
  const auto pi = probability_vector(d, th, EmigrationFamily::Markovian);
  const HistoryIndexer idx(d);
  const auto trans = build_transitions<double>(th, d, EmigrationFamily::Markovian);
  auto rng = make_stream(11, 0);
  const int draws = 100000;
  std::vector<int> hits(pi.size(), 0);
  for (int i = 0; i < draws; ++i) ++hits[idx.rank(simulate_individual(trans, rng))];
  for (std::size_t j = 0; j < pi.size(); ++j) {
    const double freq = static_cast<double>(hits[j]) / draws;
    CHECK(std::abs(freq - pi[j]) <= 4.0 * std::sqrt(pi[j] * (1.0 - pi[j]) / draws));
  }
}

TEST_CASE("seeded streams reproduce histories") {
  StudyDesign d({2, 2});
  const auto th = uniform_parameters(d, EmigrationFamily::Markovian, 10.0, 0.5, 0.8, 0.5, 0.3, 0.6);
  auto a = make_stream(3, 7);
  auto b = make_stream(3, 7);
  for (int i = 0; i < 200; ++i) {
    CHECK(simulate_individual(th, EmigrationFamily::Markovian, d, a) ==
          simulate_individual(th, EmigrationFamily::Markovian, d, b));
  }
  CHECK(derive_seed(3, 7) != derive_seed(3, 8));
  CHECK(derive_seed(3, 7) != derive_seed(4, 7));
}

TEST_CASE("simulated counts equal A z exactly") {
  StudyDesign d({2, 1, 2});
  const auto th = uniform_parameters(d, EmigrationFamily::Markovian, 300.0, 0.5, 0.85, 0.45, 0.3, 0.6);
  const HistoryIndexer idx(d);
  int seed = 0;
  for (const auto& L : {ObservedLayout::individual(d), ObservedLayout::batch(d, Aggregation::Occasion),
                        ObservedLayout::batch(d, Aggregation::Period)}) {
    const auto A = build_link_matrix(d, L);
    for (int r = 0; r < 5; ++r) {
      auto rng = make_stream(static_cast<std::uint64_t>(seed++), 0);
      const auto ds = simulate_dataset(300, th, EmigrationFamily::Markovian, d, L, rng);
      CHECK(ds.z.total() == 300);
      const auto z = ds.z.dense(idx.count());
      CHECK(A.apply(std::span<const std::int64_t>(z)) == ds.data.y);
      CHECK(apply_link(ds.z, idx, L) == ds.data.y);
    }
  }
}

TEST_CASE("dataset with no individuals is rejected") {
  StudyDesign d({1, 1});
  const auto th = uniform_parameters(d, EmigrationFamily::None, 10.0, 0.5, 0.8, 0.5, 0, 0);
  auto rng = make_stream(1, 0);
  CHECK_THROWS_AS(simulate_dataset(0, th, EmigrationFamily::None, d, ObservedLayout::individual(d), rng), InputError);
}

TEST_CASE("marked individuals never exceed N in the six period setting") {
  StudyDesign d(std::vector<int>(6, 2));
  auto th = uniform_parameters(d, EmigrationFamily::Markovian, 5000, 0.0, 0.9, 0.4, 0.2, 0.7);
  th.gamma_star = gamma_to_star(std::vector<double>(6, 1.0 / 6));
  auto rng = make_stream(1, 0);
  const auto ds = simulate_dataset(5000, th, EmigrationFamily::Markovian, d,
                                   ObservedLayout::batch(d, Aggregation::Occasion), rng);
  CHECK(ds.data.marked_total() <= 5000.0);
  CHECK(ds.data.marked_total() > 0.0);
}

TEST_CASE("product truths for reparametrized quantities") {
  StudyDesign d(std::vector<int>(6, 2));
  auto th = uniform_parameters(d, EmigrationFamily::Markovian, 5000, 0.0, 0.9, 0.4, 0.2, 0.7);
  th.gamma_star = gamma_to_star(std::vector<double>(6, 1.0 / 6));
  std::map<std::string, double> t;
  for (const auto& q : Parametrization::truth_quantities(th, d, EmigrationFamily::Markovian)) t[q.name] = q.value;
  CHECK(t.at("eta1") == doctest::Approx(0.72).epsilon(1e-12));
  CHECK(t.at("eta2") == doctest::Approx(0.63).epsilon(1e-12));
  CHECK(t.at("gamma[3]") == doctest::Approx(1.0 / 6).epsilon(1e-12));
}

TEST_CASE("summaries use converged replicates only") {
  auto est = [](double v, double lo, double hi) {
    Estimate e;
    e.name = "alpha[1]";
    e.value = v;
    e.lower = lo;
    e.upper = hi;
    e.interval = true;
    return e;
  };
  std::vector<ReplicateFit> fits(4);
  for (int i = 0; i < 4; ++i) {
    fits[i].replicate = i;
    fits[i].model = "x";
    fits[i].converged = true;
  }
  fits[0].estimates = {est(0.2, 0.1, 0.3)};
  fits[1].estimates = {est(0.3, 0.25, 0.45)};
  fits[2].estimates = {est(0.1, 0.05, 0.19)};
  fits[3].converged = false;
  fits[3].estimates = {est(0.9, 0.8, 0.95)};
  ModelSpec m = named_model("atbt");
  m.name = "x";
  const auto s = summarize(m, fits, {{"alpha[1]", 0.2}});
  CHECK(s.used == 3);
  CHECK(s.excluded == 1);
  const auto* p = s.find("alpha[1]");
  REQUIRE(p != nullptr);
  CHECK(p->mean == doctest::Approx(0.2));
  CHECK(p->cic == doctest::Approx(100.0 / 3.0));
  CHECK(p->ciw == doctest::Approx((0.2 + 0.2 + 0.14) / 3.0));
}

TEST_CASE("small study is deterministic and independent of threads") {
  StudyConfig c;
  c.design = StudyDesign({2, 2, 2});
  c.family = EmigrationFamily::Markovian;
  c.truth = uniform_parameters(c.design, EmigrationFamily::Markovian, 400, 0.0, 0.85, 0.45, 0.25, 0.6);
  c.truth.gamma_star = gamma_to_star(std::vector<double>(3, 1.0 / 3));
  c.replicates = 4;
  c.seed = 21;
  c.fit.restarts = 2;
  c.models = {named_model("note"), named_model("acbc")};
  const auto a = run_study(c);
  c.threads = 3;
  const auto b = run_study(c);
  REQUIRE(a.fits.size() == 8);
  for (std::size_t i = 0; i < a.fits.size(); ++i) {
    CHECK(a.fits[i].replicate == static_cast<int>(i / 2));
    CHECK(a.fits[i].loglik == b.fits[i].loglik);
  }
  CHECK(a.marked_totals == b.marked_totals);
  for (const auto& m : a.models) {
    CHECK(m.used + m.excluded == 4);
    for (const auto& p : m.parameters) {
      if (p.intervals == 0) continue;
      CHECK(p.cic >= 0.0);
      CHECK(p.cic <= 100.0);
      CHECK(p.ciw >= 0.0);
    }
  }
  CHECK(a.find("acbc")->find("beta[2]") != nullptr);
}

TEST_CASE("study configuration is validated") {
  StudyConfig c;
  c.design = StudyDesign({1, 1});
  c.family = EmigrationFamily::None;
  c.truth = uniform_parameters(c.design, EmigrationFamily::None, 30, 0.5, 0.8, 0.5, 0, 0);
  c.replicates = 1;
  CHECK_THROWS_AS(run_study(c), InputError);
  c.models = {named_model("note")};
  c.replicates = 0;
  CHECK_THROWS_AS(run_study(c), InputError);
}
