#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lmte/design.hpp"
#include "lmte/parameters.hpp"

namespace lmte {

/// Latent state codes: 0 not yet entered, 1 present and not captured,
/// 2 captured, 3 temporary emigrant, 4 dead or permanently gone.
enum class LatentState : std::uint8_t { NotEntered = 0, Uncaptured = 1, Captured = 2, Emigrant = 3, Dead = 4 };

/// One state code per secondary occasion, in flat occasion order.
struct LatentHistory {
  std::vector<std::uint8_t> states;

  std::size_t size() const { return states.size(); }
  std::uint8_t operator[](std::size_t o) const { return states[o]; }
  bool operator==(const LatentHistory&) const = default;
  auto operator<=>(const LatentHistory&) const = default;

  /// Primary period of the first non-zero state, or -1 for the all-zero sequence.
  int entry_period(const StudyDesign& design) const;
  /// State on the first occasion of the entry period.
  int entry_state(const StudyDesign& design) const;
};

/// Parses "00 21 33 12" (spaces ignored) into a history.
LatentHistory history_from_string(const std::string& s);
std::string to_string(const LatentHistory& h, const StudyDesign& design);

/// True iff the history breaks none of the exclusion rules: all-zero;
/// 0 after non-0 within a period; 0 after any non-0; starting with 3 or 4;
/// 3 preceded by non-3 within a period; 3 followed by non-3 within a period;
/// 4 followed by non-4; entry (first non-0 state) in a state other than 1
/// or 2; and 4 preceded by non-4 within a period, which the within-period
/// transitions cannot produce. Throws on a length or code-domain mismatch.
bool is_valid_history(const LatentHistory& h, const StudyDesign& design);

/// Canonical enumeration of valid histories: entry period ascending, then
/// lexicographic by state codes. Supports counting, ranking, unranking and
/// streaming without materializing the history list.
class HistoryIndexer {
 public:
  explicit HistoryIndexer(const StudyDesign& design);

  std::uint64_t count() const { return count_; }
  std::uint64_t rank(const LatentHistory& h) const;
  LatentHistory unrank(std::uint64_t index) const;

  /// Visits every valid history in canonical order.
  void for_each(const std::function<void(const LatentHistory&)>& visit) const;

  const StudyDesign& design() const { return design_; }

 private:
  std::uint64_t rank_continuation(const LatentHistory& h, int k) const;
  void unrank_continuation(std::uint64_t r, int k, LatentHistory& h) const;
  void visit_from(int k, LatentHistory& h, const std::function<void(const LatentHistory&)>& visit) const;

  StudyDesign design_;
  std::vector<std::uint64_t> continuations_;  // continuations_[k]: completions from period k on
  std::vector<std::uint64_t> entry_offset_;   // first canonical index for each entry period
  std::uint64_t count_ = 0;
};

std::vector<LatentHistory> enumerate_valid_histories(const StudyDesign& design);

using Matrix4 = std::array<std::array<double, 4>, 4>;

/// Within-period transition between occasions l and l+1 of period k, over
/// states {1, 2, 3, 4} (row: occasion l, column: occasion l+1).
Matrix4 within_period_transition(const ParameterSet& theta, const StudyDesign& design, int k, int l);

/// Transition from the last occasion of period k to the first of period k+1,
/// over states {1, 2, 3, 4}.
Matrix4 between_period_transition(const ParameterSet& theta, const StudyDesign& design, int k, EmigrationFamily family);

/// pi_j for one valid history (accumulated in log space).
double history_probability(const LatentHistory& h, const ParameterSet& theta, const StudyDesign& design,
                           EmigrationFamily family);

/// pi over the canonical enumeration. Materializes J entries; intended for
/// designs where that is affordable.
std::vector<double> probability_vector(const StudyDesign& design, const ParameterSet& theta, EmigrationFamily family);

}  // namespace lmte
