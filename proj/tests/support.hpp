#pragma once

#include <random>
#include <vector>

#include "lmte/design.hpp"
#include "lmte/parameters.hpp"

namespace lmte::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Interior parameter set with every probability drawn from [lo, hi].
inline ParameterSet random_parameters(const StudyDesign& d, EmigrationFamily family, std::mt19937_64& rng,
                                      double N = 10.0, double lo = 0.1, double hi = 0.9) {
  const std::size_t K = static_cast<std::size_t>(d.periods());
  auto draw = [&](std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform(rng, lo, hi);
    return v;
  };
  ParameterSet th;
  th.N = N;
  th.gamma_star = draw(K - 1);
  th.phi = draw(K - 1);
  th.p = draw(static_cast<std::size_t>(d.total_occasions()));
  if (family == EmigrationFamily::CompletelyRandom) th.alpha_prime = draw(K - 1);
  if (family == EmigrationFamily::Markovian) {
    th.alpha = draw(K - 1);
    th.beta = draw(K >= 2 ? K - 2 : 0);
  }
  return th;
}

/// The same structural values expressed in the Markovian family.
inline ParameterSet as_markovian(ParameterSet th, EmigrationFamily from) {
  const std::size_t K = th.phi.size() + 1;
  if (from == EmigrationFamily::None) {
    th.alpha.assign(K - 1, 0.0);
    th.beta.assign(K >= 2 ? K - 2 : 0, 0.5);
  } else if (from == EmigrationFamily::CompletelyRandom) {
    th.alpha = th.alpha_prime;
    th.beta.clear();
    for (std::size_t k = 1; k + 1 < K; ++k) th.beta.push_back(1.0 - th.alpha_prime[k]);
  }
  th.alpha_prime.clear();
  return th;
}

}  // namespace lmte::testing
