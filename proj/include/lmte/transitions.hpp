#pragma once

#include <array>
#include <vector>

#include "lmte/design.hpp"
#include "lmte/parameters.hpp"

namespace lmte {

inline constexpr int kLatentStates = 5;

template <class S>
using Latent5 = std::array<std::array<S, kLatentStates>, kLatentStates>;

/// Occasion-to-occasion transition probabilities of the latent chain over
/// the full state set {0, ..., 4}. `init[x]` is the distribution on the first
/// occasion; `step[o][x][y]` moves occasion o-1 to occasion o (step[0] unused).
///
/// Entry uses the conditional entry probability of each period, so the
/// product over the 0-block followed by entry reproduces gamma_f.
template <class S>
struct LatentTransitions {
  std::array<S, kLatentStates> init{};
  std::vector<Latent5<S>> step;
};

template <class S>
LatentTransitions<S> build_transitions(const BasicParameterSet<S>& th, const StudyDesign& design,
                                       EmigrationFamily family) {
  const int K = design.periods();
  const int T = design.total_occasions();
  auto entry_hazard = [&](int k) { return k + 1 < K ? th.gamma_star[k] : S(1.0); };

  LatentTransitions<S> tr;
  for (auto& v : tr.init) v = S(0.0);
  {
    const S h = entry_hazard(0);
    const S p = th.p[0];
    tr.init[0] = 1.0 - h;
    tr.init[1] = h * (1.0 - p);
    tr.init[2] = h * p;
  }
  tr.step.resize(static_cast<std::size_t>(T));
  for (int o = 1; o < T; ++o) {
    auto& m = tr.step[o];
    for (auto& row : m)
      for (auto& v : row) v = S(0.0);
    const S p = th.p[o];
    const int k = design.period_of(o);
    m[4][4] = S(1.0);
    if (design.position_of(o) > 0) {
      m[0][0] = S(1.0);
      for (int x : {1, 2}) {
        m[x][1] = 1.0 - p;
        m[x][2] = p;
      }
      m[3][3] = S(1.0);
      continue;
    }
    // Crossing from period k-1 into period k.
    const int prev = k - 1;
    const S h = entry_hazard(k);
    m[0][0] = 1.0 - h;
    m[0][1] = h * (1.0 - p);
    m[0][2] = h * p;
    const S phi = th.phi[prev];
    const S a = th.emigration(family, prev);
    const S stay = phi * (1.0 - a);
    for (int x : {1, 2}) {
      m[x][1] = stay * (1.0 - p);
      m[x][2] = stay * p;
      m[x][3] = phi * a;
      m[x][4] = 1.0 - phi;
    }
    if (family == EmigrationFamily::Markovian && prev >= 1) {
      const S b = th.return_probability(prev);
      const S back = phi * b;
      m[3][1] = back * (1.0 - p);
      m[3][2] = back * p;
      m[3][3] = phi * (1.0 - b);
      m[3][4] = 1.0 - phi;
    } else {
      for (int y = 1; y < kLatentStates; ++y) m[3][y] = m[1][y];
    }
  }
  return tr;
}

}  // namespace lmte
