#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "lmte/latent.hpp"
#include "lmte/observation.hpp"
#include "lmte/transitions.hpp"

namespace lmte {

/// Seed of the independent stream for task `index` under a master seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index);

/// One individual's latent history drawn from the latent chain.
LatentHistory simulate_individual(const ParameterSet& truth, EmigrationFamily family, const StudyDesign& design,
                                  std::mt19937_64& rng);
LatentHistory simulate_individual(const LatentTransitions<double>& transitions, std::mt19937_64& rng);

/// Sparse tally of simulated histories by canonical index, ascending.
struct LatentTally {
  std::vector<std::pair<std::uint64_t, std::int64_t>> counts;

  std::int64_t total() const;
  std::vector<std::int64_t> dense(std::uint64_t histories) const;
};

struct SimulatedDataset {
  LatentTally z;
  ObservedData data;
};

/// N independent individuals, tallied into z and mapped to y = A z. The map
/// is computed twice (per individual and from the tally) and the two must
/// agree exactly.
SimulatedDataset simulate_dataset(std::int64_t N, const ParameterSet& truth, EmigrationFamily family,
                                  const StudyDesign& design, const ObservedLayout& layout, std::mt19937_64& rng);

/// y = A z from a tally, without materializing A.
std::vector<std::int64_t> apply_link(const LatentTally& z, const HistoryIndexer& indexer, const ObservedLayout& layout);

}  // namespace lmte
