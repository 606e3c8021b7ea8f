#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lmte/design.hpp"
#include "lmte/latent.hpp"

namespace lmte {

enum class Scenario { ID, BM };
enum class Aggregation { Occasion, Period };

std::string to_string(Scenario s);
std::string to_string(Aggregation a);
Scenario scenario_from_string(const std::string& s);
Aggregation aggregation_from_string(const std::string& s);

/// Identifier of one observed count.
struct RowId {
  enum class Kind { History, FirstCapture, Recapture } kind;
  std::uint64_t history = 0;  // ID: binary capture history, occasion 1 is the most significant bit
  int mark_period = -1;       // Recapture: period of first marking
  int period = -1;            // FirstCapture/Recapture: period of the capture
  int position = -1;          // occasion within `period`; -1 under period-level aggregation
};

/// Ordered index table of observed counts.
///
/// ID: the 2^T - 1 non-null capture histories in increasing binary order.
/// BM: the m block then the n block, each in (k, t, l) lexicographic order.
/// Occasion-level rows are m[k,l] for every occasion and n[k,t,l] for k <= t,
/// with l starting at 2 when t = k. Period-level rows are m[k] and n[k,t];
/// n[k,k] is structurally zero when T_k = 1 and is dropped (recorded in
/// `dropped()`).
class ObservedLayout {
 public:
  static ObservedLayout individual(const StudyDesign& design);
  static ObservedLayout batch(const StudyDesign& design, Aggregation aggregation);

  Scenario scenario() const { return scenario_; }
  Aggregation aggregation() const { return aggregation_; }
  const StudyDesign& design() const { return design_; }

  std::size_t size() const { return rows_.size(); }
  const RowId& row(std::size_t i) const { return rows_[i]; }
  std::string label(std::size_t i) const;
  /// Number of rows in the m block (BM only; 0 for ID).
  std::size_t first_capture_rows() const { return m_rows_; }
  const std::vector<std::string>& dropped() const { return dropped_; }

  /// BM: row for a first capture on flat occasion o.
  int first_capture_row(int o) const { return first_row_.at(static_cast<std::size_t>(o)); }
  /// BM: row for a recapture on occasion o of an individual marked in
  /// `mark_period`, or -1 when no such count exists.
  int recapture_row(int o, int mark_period) const;
  /// ID: row of a nonzero binary history.
  int history_row(std::uint64_t bits) const;

  /// Looks up a row by its label, e.g. "m[2,1]", "n[1,3]", "0110".
  int find(const std::string& label) const;

 private:
  Scenario scenario_ = Scenario::ID;
  Aggregation aggregation_ = Aggregation::Occasion;
  StudyDesign design_;
  std::vector<RowId> rows_;
  std::size_t m_rows_ = 0;
  std::vector<std::string> dropped_;
  std::vector<int> first_row_;
  std::vector<std::vector<int>> recapture_row_;  // [o][mark_period]
};

/// Observed counts aligned to a layout.
struct ObservedData {
  ObservedLayout layout;
  std::vector<std::int64_t> y;

  ObservedData() = default;
  ObservedData(ObservedLayout l, std::vector<std::int64_t> counts);

  /// Distinct marked individuals: sum of y (ID) or of the m block (BM).
  double marked_total() const;
  const StudyDesign& design() const { return layout.design(); }
};

/// Binary observed image of a latent history (2 -> 1, everything else -> 0);
/// nullopt for the null history.
std::optional<std::vector<std::uint8_t>> observed_history_of(const LatentHistory& h);

/// Rows a history increments under a BM layout, in occasion order. Under
/// period-level aggregation a row can repeat.
std::vector<int> bm_contributions(const LatentHistory& h, const ObservedLayout& layout);

/// Rows a history increments under any layout.
std::vector<int> contributions(const LatentHistory& h, const ObservedLayout& layout);

/// Sparse nonnegative integer matrix A (rows: layout, columns: canonical
/// history order), compressed by column.
class LinkMatrix {
 public:
  struct Entry {
    int row;
    int count;
  };
  static LinkMatrix build(const StudyDesign& design, const ObservedLayout& layout);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return col_ptr_.size() - 1; }
  std::span<const Entry> column(std::size_t j) const {
    return {entries_.data() + col_ptr_[j], col_ptr_[j + 1] - col_ptr_[j]};
  }
  /// y = A z for a dense latent count vector.
  std::vector<std::int64_t> apply(std::span<const std::int64_t> z) const;
  /// A pi (expected observed counts per individual).
  std::vector<double> apply(std::span<const double> pi) const;

 private:
  std::size_t rows_ = 0;
  std::vector<std::size_t> col_ptr_{0};
  std::vector<Entry> entries_;
};

LinkMatrix build_link_matrix(const StudyDesign& design, const ObservedLayout& layout);

}  // namespace lmte
