#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "lmte/observation.hpp"

namespace lmte {

/// Limits for the brute-force oracles.
struct OracleBudget {
  std::uint64_t max_histories = 12;
  std::int64_t max_N = 6;
  std::uint64_t max_draws = 100'000'000;
};

class BudgetError : public InputError {
 public:
  using InputError::InputError;
};

/// Every sequence in {0..4}^T that passes is_valid_history, in lexicographic order.
std::vector<LatentHistory> bruteforce_valid_histories(const StudyDesign& design);

/// P(A z = y) for z ~ Multinomial(N, pi), summed over every composition of N.
double exact_pmf_bruteforce(std::span<const std::int64_t> y, std::int64_t N, std::span<const double> pi,
                            const LinkMatrix& A, const OracleBudget& budget = {});

/// The full distribution of y = A z: every reachable y with its probability.
std::map<std::vector<std::int64_t>, double> exact_pmf_table(std::int64_t N, std::span<const double> pi,
                                                           const LinkMatrix& A, const OracleBudget& budget = {});

struct MonteCarloEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
  std::uint64_t draws = 0;
  std::uint64_t hits = 0;
};

/// Fraction of simulated datasets equal to y. Draws are split into fixed
/// chunks with their own streams, so the result does not depend on `threads`.
MonteCarloEstimate mc_pmf_estimate(std::span<const std::int64_t> y, std::int64_t N, const ParameterSet& truth,
                                   EmigrationFamily family, const StudyDesign& design, const ObservedLayout& layout,
                                   std::uint64_t draws, std::uint64_t seed, int threads = 1,
                                   const OracleBudget& budget = {});

using ScalarFunction = std::function<double(std::span<const double>)>;

struct GradientCheck {
  double max_relative_error = 0.0;
  std::vector<double> numeric;
};

/// Central differences with step h * max(1, |x_i|) against `gradient`.
/// The error of coordinate i is |g_i - fd_i| / max(1, |g_i|, |fd_i|).
GradientCheck finite_difference_check(const ScalarFunction& f, std::span<const double> point,
                                      std::span<const double> gradient, double step = 1e-5);

}  // namespace lmte
