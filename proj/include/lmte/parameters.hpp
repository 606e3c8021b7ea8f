#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "lmte/design.hpp"
#include "lmte/dual.hpp"

namespace lmte {

/// Structural parameters of a temporary-emigration model.
///
/// Indices are 0-based transitions: `phi[k]`, `alpha[k]` and `alpha_prime[k]`
/// govern the move from period k to k+1 (k = 0..K-2). `beta` has K-2 entries
/// and `beta[k-1]` governs the move from period k to k+1 for k >= 1; return
/// from emigration is impossible before the second period. `p` is indexed by
/// flat occasion. Entry enters through the conditional probabilities
/// `gamma_star` (K-1 entries); the last period's conditional entry is 1.
template <class S>
struct BasicParameterSet {
  S N = S(0.0);
  std::vector<S> gamma_star;
  std::vector<S> phi;
  std::vector<S> p;
  std::vector<S> alpha_prime;
  std::vector<S> alpha;
  std::vector<S> beta;

  /// Emigration probability used on transition k for `family`.
  S emigration(EmigrationFamily family, int k) const {
    switch (family) {
      case EmigrationFamily::None: return S(0.0);
      case EmigrationFamily::CompletelyRandom: return alpha_prime.at(k);
      case EmigrationFamily::Markovian: return alpha.at(k);
    }
    return S(0.0);
  }

  /// Return probability for an emigrant on transition k (Markovian, k >= 1).
  S return_probability(int k) const { return beta.at(k - 1); }

  std::vector<S> gamma() const;
};

using ParameterSet = BasicParameterSet<double>;

/// Stick-breaking map: gamma_1 = g*_1, gamma_k = g*_k prod_{j<k}(1 - g*_j),
/// gamma_K = 1 - sum_{k<K} gamma_k. Endpoints 0 and 1 are accepted here so
/// that fixed closed-population entry (1, 0, ..., 0) can be represented;
/// `gamma_from_star_checked` enforces the open interval.
template <class S>
std::vector<S> gamma_from_star(std::span<const S> gamma_star) {
  std::vector<S> g;
  g.reserve(gamma_star.size() + 1);
  S remaining(1.0);
  for (const S& gs : gamma_star) {
    g.push_back(gs * remaining);
    remaining = remaining * (1.0 - gs);
  }
  g.push_back(remaining);
  return g;
}

std::vector<double> gamma_from_star_checked(std::span<const double> gamma_star);

/// Inverse of `gamma_from_star` for a point in the open simplex.
std::vector<double> gamma_to_star(std::span<const double> gamma);

template <class S>
std::vector<S> BasicParameterSet<S>::gamma() const {
  return gamma_from_star<S>(std::span<const S>(gamma_star));
}

/// Checks vector lengths against the design and family and that every
/// probability lies in [0, 1]. Interior requirements are enforced by the
/// parametrization, which knows which entries are fixed.
void check_shape(const ParameterSet& params, const StudyDesign& design, EmigrationFamily family);

/// Convenience constructor: every probability group filled with one value.
ParameterSet uniform_parameters(const StudyDesign& design, EmigrationFamily family, double N,
                                double gamma_star, double phi, double p, double alpha, double beta);

/// Promotes a double parameter set to any scalar type.
template <class S>
BasicParameterSet<S> promote(const ParameterSet& x) {
  auto conv = [](const std::vector<double>& v) { return std::vector<S>(v.begin(), v.end()); };
  BasicParameterSet<S> r;
  r.N = S(x.N);
  r.gamma_star = conv(x.gamma_star);
  r.phi = conv(x.phi);
  r.p = conv(x.p);
  r.alpha_prime = conv(x.alpha_prime);
  r.alpha = conv(x.alpha);
  r.beta = conv(x.beta);
  return r;
}

template <class S>
ParameterSet values_of(const BasicParameterSet<S>& x) {
  auto conv = [](const std::vector<S>& v) {
    std::vector<double> r;
    r.reserve(v.size());
    for (const auto& e : v) r.push_back(value_of(e));
    return r;
  };
  ParameterSet r;
  r.N = value_of(x.N);
  r.gamma_star = conv(x.gamma_star);
  r.phi = conv(x.phi);
  r.p = conv(x.p);
  r.alpha_prime = conv(x.alpha_prime);
  r.alpha = conv(x.alpha);
  r.beta = conv(x.beta);
  return r;
}

}  // namespace lmte
