#include "lmte/parameters.hpp"

#include <fmt/format.h>

namespace lmte {

std::vector<double> gamma_from_star_checked(std::span<const double> gamma_star) {
  for (std::size_t i = 0; i < gamma_star.size(); ++i) {
    const double g = gamma_star[i];
    if (!(g > 0.0 && g < 1.0)) {
      throw InputError(fmt::format("gamma_star[{}] = {} is outside (0, 1)", i + 1, g));
    }
  }
  return gamma_from_star<double>(gamma_star);
}

std::vector<double> gamma_to_star(std::span<const double> gamma) {
  if (gamma.empty()) throw InputError("empty entry-probability vector");
  double total = 0.0;
  for (double g : gamma) {
    if (!(g > 0.0 && g < 1.0) && gamma.size() > 1) {
      throw InputError(fmt::format("entry probability {} is outside the open simplex", g));
    }
    total += g;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InputError(fmt::format("entry probabilities sum to {}, not 1", total));
  std::vector<double> star;
  star.reserve(gamma.size() - 1);
  double remaining = 1.0;
  for (std::size_t k = 0; k + 1 < gamma.size(); ++k) {
    star.push_back(gamma[k] / remaining);
    remaining -= gamma[k];
  }
  return star;
}

namespace {
void check_probs(const std::vector<double>& v, std::size_t expected, const char* name) {
  if (v.size() != expected) {
    throw InputError(fmt::format("parameter '{}' has {} entries, expected {}", name, v.size(), expected));
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0 && v[i] <= 1.0)) {
      throw InputError(fmt::format("parameter {}[{}] = {} is not a probability", name, i + 1, v[i]));
    }
  }
}
}  // namespace

void check_shape(const ParameterSet& params, const StudyDesign& design, EmigrationFamily family) {
  const std::size_t K = static_cast<std::size_t>(design.periods());
  if (!(params.N > 0.0) || !std::isfinite(params.N)) throw InputError("superpopulation size N must be positive");
  check_probs(params.gamma_star, K - 1, "gamma_star");
  check_probs(params.phi, K - 1, "phi");
  check_probs(params.p, static_cast<std::size_t>(design.total_occasions()), "p");
  if (family == EmigrationFamily::CompletelyRandom) check_probs(params.alpha_prime, K - 1, "alpha_prime");
  if (family == EmigrationFamily::Markovian) {
    check_probs(params.alpha, K - 1, "alpha");
    check_probs(params.beta, K >= 2 ? K - 2 : 0, "beta");
  }
}

ParameterSet uniform_parameters(const StudyDesign& design, EmigrationFamily family, double N, double gamma_star,
                                double phi, double p, double alpha, double beta) {
  const std::size_t K = static_cast<std::size_t>(design.periods());
  ParameterSet r;
  r.N = N;
  r.gamma_star.assign(K - 1, gamma_star);
  r.phi.assign(K - 1, phi);
  r.p.assign(static_cast<std::size_t>(design.total_occasions()), p);
  if (family == EmigrationFamily::CompletelyRandom) r.alpha_prime.assign(K - 1, alpha);
  if (family == EmigrationFamily::Markovian) {
    r.alpha.assign(K - 1, alpha);
    r.beta.assign(K >= 2 ? K - 2 : 0, beta);
  }
  return r;
}

}  // namespace lmte
