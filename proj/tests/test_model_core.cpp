#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "lmte/parametrization.hpp"
#include "support.hpp"

using namespace lmte;

TEST_CASE("design validation") {
  StudyDesign mantella({3, 3, 3, 4, 4, 4});
  CHECK(validate_design(mantella, EmigrationFamily::Markovian).total_occasions() == 21);
  StudyDesign sim({2, 2, 2, 2, 2, 2});
  CHECK(validate_design(sim).total_occasions() == 12);
  CHECK_THROWS_AS(validate_design(StudyDesign({3}), EmigrationFamily::Markovian), InputError);
  CHECK_NOTHROW(validate_design(StudyDesign({3}), EmigrationFamily::None));
  CHECK_THROWS_AS(validate_design(StudyDesign({2, 0})), InputError);
  CHECK_THROWS_AS(validate_design(StudyDesign{}), InputError);
  CHECK(mantella.occasion(3, 2) == 11);
  CHECK(mantella.period_of(11) == 3);
  CHECK(mantella.position_of(11) == 2);
}

TEST_CASE("stick-breaking entry probabilities") {
  const std::vector<double> star{1.0 / 6, 1.0 / 5, 1.0 / 4, 1.0 / 3, 1.0 / 2};
  const auto g = gamma_from_star_checked(star);
  REQUIRE(g.size() == 6);
  for (double v : g) CHECK(v == doctest::Approx(1.0 / 6).epsilon(1e-14));

  CHECK_THROWS_AS(gamma_from_star_checked(std::vector<double>{1.0, 0.5}), InputError);
  CHECK_THROWS_AS(gamma_from_star_checked(std::vector<double>{0.0}), InputError);

  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 1 + rep % 7;
    std::vector<double> x(n);
    for (auto& v : x) v = testing::uniform(rng, 0.01, 0.99);
    const auto back = gamma_to_star(gamma_from_star_checked(x));
    REQUIRE(back.size() == n);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(back[i] - x[i]) <= 1e-12);

    std::vector<double> w(n + 1);
    double total = 0.0;
    for (auto& v : w) total += (v = testing::uniform(rng, 0.05, 1.0));
    for (auto& v : w) v /= total;
    const auto fwd = gamma_from_star_checked(gamma_to_star(w));
    for (std::size_t i = 0; i <= n; ++i) CHECK(std::abs(fwd[i] - w[i]) <= 1e-12);
  }
}

TEST_CASE("logit transform values") {
  CHECK(logit(0.5) == 0.0);
  CHECK(logit(0.9) == doctest::Approx(2.19722).epsilon(1e-5));
  CHECK(std::abs(logit(0.9) - (std::log(0.9) - std::log(0.1))) < 1e-14);
  CHECK(expit(logit(0.25)) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(expit(-800.0) >= 0.0);
  CHECK(expit(800.0) <= 1.0);
}

TEST_CASE("unconstrained round trip over families and constraints") {
  std::mt19937_64 rng(5);
  const std::vector<StudyDesign> designs{StudyDesign({2, 2, 2, 2, 2, 2}), StudyDesign({1, 3}),
                                         StudyDesign({3, 3, 3, 4, 4, 4})};
  std::vector<ModelSpec> models;
  for (const char* n : {"note", "rand_t", "rand_c", "acbc", "acbt", "atbc", "atbt"}) models.push_back(named_model(n));
  ModelSpec constant_p = named_model("atbt");
  constant_p.constraints.p = GroupConstraint::constant();
  models.push_back(constant_p);
  ModelSpec no_reparam = named_model("rand_t");
  no_reparam.constraints.final_product_reparam = false;
  models.push_back(no_reparam);
  models.push_back(closed_population(named_model("note")));

  int checked = 0;
  for (const auto& d : designs) {
    for (const auto& m : models) {
      const double M = 37.0;
      Parametrization par(d, m, M);
      for (int rep = 0; rep < 100 / static_cast<int>(designs.size() * models.size()) + 1; ++rep) {
        std::vector<double> u(par.size());
        for (auto& v : u) v = testing::uniform(rng, -3.0, 3.0);
        const auto th = par.from_unconstrained(u);
        CHECK(th.N > M);
        const auto back = par.to_unconstrained(th);
        REQUIRE(back.size() == u.size());
        for (std::size_t i = 0; i < u.size(); ++i) CHECK(std::abs(back[i] - u[i]) <= 1e-10);
        ++checked;
      }
    }
  }
  CHECK(checked >= 100);
}

TEST_CASE("natural-scale round trip when nothing is confounded") {
  std::mt19937_64 rng(8);
  StudyDesign d({2, 3, 2});
  ModelSpec m = named_model("acbt");
  Parametrization par(d, m, 12.0);
  CHECK_FALSE(par.reparametrized());
  for (int rep = 0; rep < 100; ++rep) {
    auto th = testing::random_parameters(d, EmigrationFamily::Markovian, rng, 20.0 + rep);
    std::fill(th.alpha.begin(), th.alpha.end(), th.alpha[0]);
    const auto back = par.from_unconstrained(par.to_unconstrained(th));
    CHECK(std::abs(back.N - th.N) <= 1e-10 * th.N);
    for (std::size_t i = 0; i < th.p.size(); ++i) CHECK(std::abs(back.p[i] - th.p[i]) <= 1e-10);
    for (std::size_t i = 0; i < th.beta.size(); ++i) CHECK(std::abs(back.beta[i] - th.beta[i]) <= 1e-10);
    for (std::size_t i = 0; i < th.phi.size(); ++i) CHECK(std::abs(back.phi[i] - th.phi[i]) <= 1e-10);
  }
}

TEST_CASE("boundary values are rejected") {
  StudyDesign d({2, 2});
  Parametrization par(d, named_model("note"), 3.0);
  auto th = uniform_parameters(d, EmigrationFamily::None, 10.0, 0.5, 0.9, 0.4, 0.0, 0.0);
  CHECK_NOTHROW(par.to_unconstrained(th));
  th.p[1] = 1.0;
  CHECK_THROWS_AS(par.to_unconstrained(th), InputError);
  th.p[1] = 0.4;
  th.N = 3.0;
  CHECK_THROWS_AS(par.to_unconstrained(th), InputError);
}

TEST_CASE("free dimension of the reduced families") {
  StudyDesign d({2, 2, 2, 2, 2, 2});
  ModelSpec mark = named_model("atbt");
  mark.constraints.alpha = GroupConstraint::fixed_at({0.0});
  Parametrization fixed_alpha(d, mark, 0.0);
  Parametrization note(d, named_model("note"), 0.0);
  CHECK(fixed_alpha.size() == note.size());

  // 1 + (K-1) entry + (K-1) survival + T capture
  CHECK(note.size() == 1 + 5 + 5 + 12);
  Parametrization atbt(d, named_model("atbt"), 0.0);
  CHECK(atbt.reparametrized());
  // phi_1..4, alpha_1..4, beta_2..4, eta1, eta2 replace 5 + 5 + 4
  CHECK(atbt.size() == 1 + 5 + 4 + 12 + 4 + 3 + 2);
  Parametrization acbt(d, named_model("acbt"), 0.0);
  CHECK_FALSE(acbt.reparametrized());
  CHECK(acbt.size() == 1 + 5 + 5 + 12 + 1 + 4);
}

TEST_CASE("identifiable products of the final transition") {
  StudyDesign d({2, 2, 2, 2, 2, 2});
  auto th = uniform_parameters(d, EmigrationFamily::Markovian, 5000.0, 0.5, 0.9, 0.4, 0.2, 0.7);
  Parametrization par(d, named_model("atbt"), 0.0);
  const auto rep = par.reported(th);
  const auto& names = par.reported_names();
  REQUIRE(rep.size() == names.size());
  double eta1 = -1, eta2 = -1;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == "eta1") eta1 = rep[i];
    if (names[i] == "eta2") eta2 = rep[i];
  }
  CHECK(eta1 == doctest::Approx(0.72).epsilon(1e-12));
  CHECK(eta2 == doctest::Approx(0.63).epsilon(1e-12));
  const auto back = par.from_unconstrained(par.to_unconstrained(th));
  CHECK(back.phi[4] * (1 - back.alpha[4]) == doctest::Approx(0.72).epsilon(1e-12));
  CHECK(back.phi[4] * back.beta[3] == doctest::Approx(0.63).epsilon(1e-12));
}
