#include "lmte/simulate.hpp"

#include <map>
#include <stdexcept>

#include <fmt/format.h>

#include "lmte/transitions.hpp"

namespace lmte {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

int draw_state(const std::array<double, kLatentStates>& probs, std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  int last = -1;
  for (int x = 0; x < kLatentStates; ++x) {
    if (probs[x] <= 0.0) continue;
    acc += probs[x];
    last = x;
    if (u < acc) return x;
  }
  if (last < 0) throw std::logic_error("transition row has no mass");
  return last;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(derive_seed(seed, index));
}

LatentHistory simulate_individual(const ParameterSet& truth, EmigrationFamily family, const StudyDesign& design,
                                  std::mt19937_64& rng) {
  return simulate_individual(build_transitions<double>(truth, design, family), rng);
}

LatentHistory simulate_individual(const LatentTransitions<double>& tr, std::mt19937_64& rng) {
  LatentHistory h;
  const int T = static_cast<int>(tr.step.size());
  h.states.resize(static_cast<std::size_t>(T));
  int x = draw_state(tr.init, rng);
  h.states[0] = static_cast<std::uint8_t>(x);
  for (int o = 1; o < T; ++o) {
    x = draw_state(tr.step[o][x], rng);
    h.states[static_cast<std::size_t>(o)] = static_cast<std::uint8_t>(x);
  }
  return h;
}

std::int64_t LatentTally::total() const {
  std::int64_t t = 0;
  for (const auto& [j, c] : counts) t += c;
  return t;
}

std::vector<std::int64_t> LatentTally::dense(std::uint64_t histories) const {
  std::vector<std::int64_t> z(histories, 0);
  for (const auto& [j, c] : counts) z.at(j) = c;
  return z;
}

std::vector<std::int64_t> apply_link(const LatentTally& z, const HistoryIndexer& indexer, const ObservedLayout& layout) {
  std::vector<std::int64_t> y(layout.size(), 0);
  for (const auto& [j, c] : z.counts) {
    for (int r : contributions(indexer.unrank(j), layout)) y[static_cast<std::size_t>(r)] += c;
  }
  return y;
}

SimulatedDataset simulate_dataset(std::int64_t N, const ParameterSet& truth, EmigrationFamily family,
                                  const StudyDesign& design, const ObservedLayout& layout, std::mt19937_64& rng) {
  if (N < 1) throw InputError("N must be at least 1");
  if (!(design == layout.design())) throw InputError("layout was built for a different design");
  validate_design(design, family);
  check_shape(truth, design, family);
  const auto tr = build_transitions<double>(truth, design, family);
  HistoryIndexer indexer(design);
  std::map<std::uint64_t, std::int64_t> tally;
  std::vector<std::int64_t> y(layout.size(), 0);
  for (std::int64_t i = 0; i < N; ++i) {
    const auto h = simulate_individual(tr, rng);
    if (!is_valid_history(h, design)) throw std::logic_error("simulated an invalid history");
    ++tally[indexer.rank(h)];
    for (int r : contributions(h, layout)) ++y[static_cast<std::size_t>(r)];
  }
  SimulatedDataset out;
  out.z.counts.assign(tally.begin(), tally.end());
  if (apply_link(out.z, indexer, layout) != y) throw std::logic_error("A z does not reproduce the simulated counts");
  out.data = ObservedData(layout, std::move(y));
  return out;
}

}  // namespace lmte
