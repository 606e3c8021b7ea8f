#include "lmte/design.hpp"

#include <fmt/format.h>

namespace lmte {

StudyDesign::StudyDesign(std::vector<int> occasions_per_period) : t_(std::move(occasions_per_period)) {
  first_.reserve(t_.size());
  for (std::size_t k = 0; k < t_.size(); ++k) {
    first_.push_back(total_);
    for (int l = 0; l < t_[k]; ++l) period_of_.push_back(static_cast<int>(k));
    total_ += t_[k] > 0 ? t_[k] : 0;
  }
}

std::string to_string(EmigrationFamily f) {
  switch (f) {
    case EmigrationFamily::None: return "none";
    case EmigrationFamily::CompletelyRandom: return "random";
    case EmigrationFamily::Markovian: return "markovian";
  }
  return "?";
}

EmigrationFamily family_from_string(const std::string& s) {
  if (s == "none" || s == "NoTE" || s == "note") return EmigrationFamily::None;
  if (s == "random" || s == "completely_random") return EmigrationFamily::CompletelyRandom;
  if (s == "markovian" || s == "markov") return EmigrationFamily::Markovian;
  throw InputError(fmt::format("unknown emigration family '{}'", s));
}

StudyDesign validate_design(const StudyDesign& design, EmigrationFamily family) {
  if (design.periods() < 1) throw InputError("design needs at least one primary period");
  for (int k = 0; k < design.periods(); ++k) {
    if (design.occasions_in(k) < 1) {
      throw InputError(fmt::format("primary period {} has {} secondary occasions (need >= 1)", k + 1,
                                   design.occasions_in(k)));
    }
  }
  if (family != EmigrationFamily::None && design.periods() < 2) {
    throw InputError("temporary emigration models need at least two primary periods");
  }
  return design;
}

}  // namespace lmte
