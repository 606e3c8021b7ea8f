#include "lmte/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <fmt/format.h>

#include "lmte/simulate.hpp"

namespace lmte {

namespace {

void check_budget(std::uint64_t histories, std::int64_t N, const OracleBudget& budget) {
  if (histories > budget.max_histories) {
    throw BudgetError(fmt::format("{} latent histories exceed the oracle budget of {}", histories, budget.max_histories));
  }
  if (N < 0 || N > budget.max_N) {
    throw BudgetError(fmt::format("N = {} is outside the oracle budget [0, {}]", N, budget.max_N));
  }
}

/// Visits every composition of N into J parts with its log multinomial pmf.
void for_each_composition(std::int64_t N, std::span<const double> pi,
                          const std::function<void(const std::vector<std::int64_t>&, double)>& visit) {
  const std::size_t J = pi.size();
  std::vector<std::int64_t> z(J, 0);
  std::vector<double> logpi(J);
  for (std::size_t j = 0; j < J; ++j) logpi[j] = pi[j] > 0.0 ? std::log(pi[j]) : -INFINITY;
  const double lfN = std::lgamma(static_cast<double>(N) + 1.0);
  std::function<void(std::size_t, std::int64_t, double)> rec = [&](std::size_t j, std::int64_t left, double acc) {
    if (j + 1 == J) {
      z[j] = left;
      double lp = acc;
      if (left > 0) lp += static_cast<double>(left) * logpi[j] - std::lgamma(static_cast<double>(left) + 1.0);
      visit(z, lp);
      z[j] = 0;
      return;
    }
    for (std::int64_t c = 0; c <= left; ++c) {
      z[j] = c;
      double lp = acc;
      if (c > 0) lp += static_cast<double>(c) * logpi[j] - std::lgamma(static_cast<double>(c) + 1.0);
      rec(j + 1, left - c, lp);
    }
    z[j] = 0;
  };
  if (J == 0) throw InputError("empty probability vector");
  rec(0, N, lfN);
}

}  // namespace

std::vector<LatentHistory> bruteforce_valid_histories(const StudyDesign& design) {
  const int T = design.total_occasions();
  if (T > 12) throw BudgetError(fmt::format("5^{} sequences are too many to filter", T));
  std::vector<LatentHistory> out;
  LatentHistory h;
  h.states.assign(static_cast<std::size_t>(T), 0);
  std::uint64_t total = 1;
  for (int o = 0; o < T; ++o) total *= 5;
  for (std::uint64_t code = 0; code < total; ++code) {
    std::uint64_t c = code;
    for (int o = T - 1; o >= 0; --o) {
      h.states[static_cast<std::size_t>(o)] = static_cast<std::uint8_t>(c % 5);
      c /= 5;
    }
    if (is_valid_history(h, design)) out.push_back(h);
  }
  return out;
}

double exact_pmf_bruteforce(std::span<const std::int64_t> y, std::int64_t N, std::span<const double> pi,
                            const LinkMatrix& A, const OracleBudget& budget) {
  check_budget(A.cols(), N, budget);
  if (pi.size() != A.cols()) throw InputError("probability vector does not match the link matrix");
  if (y.size() != A.rows()) throw InputError("count vector does not match the link matrix");
  double total = 0.0;
  for_each_composition(N, pi, [&](const std::vector<std::int64_t>& z, double lp) {
    if (A.apply(std::span<const std::int64_t>(z)) == std::vector<std::int64_t>(y.begin(), y.end())) {
      total += std::exp(lp);
    }
  });
  return total;
}

std::map<std::vector<std::int64_t>, double> exact_pmf_table(std::int64_t N, std::span<const double> pi,
                                                           const LinkMatrix& A, const OracleBudget& budget) {
  check_budget(A.cols(), N, budget);
  if (pi.size() != A.cols()) throw InputError("probability vector does not match the link matrix");
  std::map<std::vector<std::int64_t>, double> table;
  for_each_composition(N, pi, [&](const std::vector<std::int64_t>& z, double lp) {
    table[A.apply(std::span<const std::int64_t>(z))] += std::exp(lp);
  });
  return table;
}

MonteCarloEstimate mc_pmf_estimate(std::span<const std::int64_t> y, std::int64_t N, const ParameterSet& truth,
                                   EmigrationFamily family, const StudyDesign& design, const ObservedLayout& layout,
                                   std::uint64_t draws, std::uint64_t seed, int threads, const OracleBudget& budget) {
  if (draws < 10000) throw InputError("at least 10^4 draws are required");
  if (draws > budget.max_draws) throw BudgetError(fmt::format("{} draws exceed the budget of {}", draws, budget.max_draws));
  if (N < 1) throw InputError("N must be at least 1");
  if (y.size() != layout.size()) throw InputError("count vector does not match the layout");
  validate_design(design, family);
  check_shape(truth, design, family);
  const auto tr = build_transitions<double>(truth, design, family);
  const std::vector<std::int64_t> target(y.begin(), y.end());

  constexpr std::uint64_t kChunk = 1 << 16;
  const std::uint64_t chunks = (draws + kChunk - 1) / kChunk;
  std::vector<std::uint64_t> hits(chunks, 0);
  auto run_chunk = [&](std::uint64_t c) {
    auto rng = make_stream(seed, c);
    const std::uint64_t n = std::min(kChunk, draws - c * kChunk);
    std::vector<std::int64_t> counts(layout.size());
    std::uint64_t h = 0;
    for (std::uint64_t d = 0; d < n; ++d) {
      std::fill(counts.begin(), counts.end(), 0);
      for (std::int64_t i = 0; i < N; ++i) {
        for (int r : contributions(simulate_individual(tr, rng), layout)) ++counts[static_cast<std::size_t>(r)];
      }
      if (counts == target) ++h;
    }
    hits[c] = h;
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(chunks)));
  if (workers == 1) {
    for (std::uint64_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::uint64_t c = static_cast<std::uint64_t>(w); c < chunks; c += static_cast<std::uint64_t>(workers)) run_chunk(c);
      });
    }
    for (auto& t : pool) t.join();
  }
  MonteCarloEstimate out;
  out.draws = draws;
  for (auto h : hits) out.hits += h;
  out.estimate = static_cast<double>(out.hits) / static_cast<double>(draws);
  out.standard_error = std::sqrt(out.estimate * (1.0 - out.estimate) / static_cast<double>(draws));
  return out;
}

GradientCheck finite_difference_check(const ScalarFunction& f, std::span<const double> point,
                                      std::span<const double> gradient, double step) {
  if (gradient.size() != point.size()) throw InputError("gradient and point differ in length");
  GradientCheck out;
  std::vector<double> x(point.begin(), point.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(point[i]));
    x[i] = point[i] + h;
    const double fp = f(x);
    x[i] = point[i] - h;
    const double fm = f(x);
    x[i] = point[i];
    const double fd = (fp - fm) / (2.0 * h);
    out.numeric.push_back(fd);
    const double err = std::abs(gradient[i] - fd) / std::max({1.0, std::abs(gradient[i]), std::abs(fd)});
    out.max_relative_error = std::max(out.max_relative_error, err);
  }
  return out;
}

}  // namespace lmte
