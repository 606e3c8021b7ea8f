#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lmte {

/// Raised for malformed designs, parameters, layouts and data files.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Primary/secondary occasion structure of a robust-design study.
///
/// Periods and occasions are indexed from 0 in code. `occasion(k, l)` gives
/// the flat index of secondary occasion l in primary period k.
class StudyDesign {
 public:
  StudyDesign() = default;
  explicit StudyDesign(std::vector<int> occasions_per_period);

  int periods() const { return static_cast<int>(t_.size()); }
  int occasions_in(int k) const { return t_.at(k); }
  int total_occasions() const { return total_; }
  const std::vector<int>& occasions_per_period() const { return t_; }

  int occasion(int k, int l) const { return first_.at(k) + l; }
  int first_occasion(int k) const { return first_.at(k); }
  int period_of(int o) const { return period_of_.at(o); }
  int position_of(int o) const { return o - first_[period_of_.at(o)]; }

  bool operator==(const StudyDesign& o) const { return t_ == o.t_; }

 private:
  std::vector<int> t_;
  std::vector<int> first_;
  std::vector<int> period_of_;
  int total_ = 0;
};

enum class EmigrationFamily { None, CompletelyRandom, Markovian };

std::string to_string(EmigrationFamily f);
EmigrationFamily family_from_string(const std::string& s);

struct EmigrationSpec {
  EmigrationFamily family = EmigrationFamily::None;
  bool alpha_time_varying = true;
  bool beta_time_varying = true;  // Markovian only
};

/// Checks K >= 1, every T_k >= 1, and K >= 2 whenever the family carries
/// emigration parameters. Returns the design unchanged on success.
StudyDesign validate_design(const StudyDesign& design, EmigrationFamily family = EmigrationFamily::None);

}  // namespace lmte
