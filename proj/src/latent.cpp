#include "lmte/latent.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "lmte/transitions.hpp"

namespace lmte {

int LatentHistory::entry_period(const StudyDesign& design) const {
  for (std::size_t o = 0; o < states.size(); ++o) {
    if (states[o] != 0) return design.period_of(static_cast<int>(o));
  }
  return -1;
}

int LatentHistory::entry_state(const StudyDesign& design) const {
  const int f = entry_period(design);
  return f < 0 ? -1 : states[static_cast<std::size_t>(design.first_occasion(f))];
}

LatentHistory history_from_string(const std::string& s) {
  LatentHistory h;
  for (char c : s) {
    if (c == ' ' || c == ',') continue;
    if (c < '0' || c > '4') throw InputError(fmt::format("invalid latent state '{}' in '{}'", c, s));
    h.states.push_back(static_cast<std::uint8_t>(c - '0'));
  }
  return h;
}

std::string to_string(const LatentHistory& h, const StudyDesign& design) {
  std::string out;
  for (std::size_t o = 0; o < h.size(); ++o) {
    if (o > 0 && design.position_of(static_cast<int>(o)) == 0) out += ' ';
    out += static_cast<char>('0' + h[o]);
  }
  return out;
}

bool is_valid_history(const LatentHistory& h, const StudyDesign& design) {
  const int T = design.total_occasions();
  if (static_cast<int>(h.size()) != T) {
    throw InputError(fmt::format("history has {} occasions, design has {}", h.size(), T));
  }
  for (auto s : h.states) {
    if (s > 4) throw InputError(fmt::format("latent state code {} out of range", int(s)));
  }
  // (1) all zero
  bool any = false;
  for (auto s : h.states) any = any || s != 0;
  if (!any) return false;
  // (4) starts with 3 or 4
  if (h[0] == 3 || h[0] == 4) return false;
  for (int o = 1; o < T; ++o) {
    const auto prev = h[o - 1];
    const auto cur = h[o];
    const bool same_period = design.position_of(o) > 0;
    // (2) 0 followed by non-0 within a period
    if (same_period && prev == 0 && cur != 0) return false;
    // (3) 0 after any non-0 state
    if (prev != 0 && cur == 0) return false;
    // (5) 3 preceded by non-3 within a period
    if (same_period && cur == 3 && prev != 3) return false;
    // (6) 3 followed by non-3 within a period
    if (same_period && prev == 3 && cur != 3) return false;
    // (7) 4 followed by non-4
    if (prev == 4 && cur != 4) return false;
    // death happens between periods only
    if (same_period && cur == 4 && prev != 4) return false;
    // entry only in states 1 or 2
    if (prev == 0 && (cur == 3 || cur == 4)) return false;
  }
  return true;
}

namespace {
constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max() / 64;

std::uint64_t checked_mul_add(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  if (a != 0 && b > (kMax - c) / a) throw InputError("design has too many latent histories to index");
  return a * b + c;
}
}  // namespace

HistoryIndexer::HistoryIndexer(const StudyDesign& design) : design_(validate_design(design)) {
  const int K = design_.periods();
  for (int k = 0; k < K; ++k) {
    if (design_.occasions_in(k) > 30) throw InputError("at most 30 secondary occasions per period are supported");
  }
  continuations_.assign(static_cast<std::size_t>(K) + 1, 1);
  for (int k = K - 1; k >= 0; --k) {
    const std::uint64_t options = (std::uint64_t{1} << design_.occasions_in(k)) + 1;
    continuations_[k] = checked_mul_add(options, continuations_[k + 1], 1);
  }
  entry_offset_.assign(static_cast<std::size_t>(K) + 1, 0);
  for (int f = 0; f < K; ++f) {
    const std::uint64_t patterns = std::uint64_t{1} << design_.occasions_in(f);
    entry_offset_[f + 1] = checked_mul_add(patterns, continuations_[f + 1], entry_offset_[f]);
  }
  count_ = entry_offset_[K];
}

std::uint64_t HistoryIndexer::rank_continuation(const LatentHistory& h, int k) const {
  const int K = design_.periods();
  if (k == K) return 0;
  const int first = design_.first_occasion(k);
  const int t = design_.occasions_in(k);
  const std::uint64_t patterns = std::uint64_t{1} << t;
  const auto s0 = h[static_cast<std::size_t>(first)];
  if (s0 == 4) return (patterns + 1) * continuations_[k + 1];
  if (s0 == 3) return patterns * continuations_[k + 1] + rank_continuation(h, k + 1);
  std::uint64_t q = 0;
  for (int l = 0; l < t; ++l) q = (q << 1) | (h[static_cast<std::size_t>(first + l)] == 2 ? 1u : 0u);
  return q * continuations_[k + 1] + rank_continuation(h, k + 1);
}

std::uint64_t HistoryIndexer::rank(const LatentHistory& h) const {
  if (!is_valid_history(h, design_)) throw InputError("cannot rank an invalid latent history");
  const int f = h.entry_period(design_);
  const int first = design_.first_occasion(f);
  std::uint64_t q = 0;
  for (int l = 0; l < design_.occasions_in(f); ++l) q = (q << 1) | (h[static_cast<std::size_t>(first + l)] == 2 ? 1u : 0u);
  return entry_offset_[f] + q * continuations_[f + 1] + rank_continuation(h, f + 1);
}

void HistoryIndexer::unrank_continuation(std::uint64_t r, int k, LatentHistory& h) const {
  const int K = design_.periods();
  if (k == K) return;
  const int first = design_.first_occasion(k);
  const int t = design_.occasions_in(k);
  const std::uint64_t patterns = std::uint64_t{1} << t;
  const std::uint64_t block = r / continuations_[k + 1];
  const std::uint64_t rest = r % continuations_[k + 1];
  if (block == patterns + 1) {
    for (int o = first; o < design_.total_occasions(); ++o) h.states[static_cast<std::size_t>(o)] = 4;
    return;
  }
  if (block == patterns) {
    for (int l = 0; l < t; ++l) h.states[static_cast<std::size_t>(first + l)] = 3;
  } else {
    for (int l = 0; l < t; ++l) {
      h.states[static_cast<std::size_t>(first + l)] = ((block >> (t - 1 - l)) & 1u) ? 2 : 1;
    }
  }
  unrank_continuation(rest, k + 1, h);
}

LatentHistory HistoryIndexer::unrank(std::uint64_t index) const {
  if (index >= count_) throw InputError(fmt::format("history index {} out of range (J = {})", index, count_));
  int f = 0;
  while (entry_offset_[f + 1] <= index) ++f;
  LatentHistory h;
  h.states.assign(static_cast<std::size_t>(design_.total_occasions()), 0);
  const std::uint64_t r = index - entry_offset_[f];
  const std::uint64_t q = r / continuations_[f + 1];
  const int first = design_.first_occasion(f);
  const int t = design_.occasions_in(f);
  for (int l = 0; l < t; ++l) h.states[static_cast<std::size_t>(first + l)] = ((q >> (t - 1 - l)) & 1u) ? 2 : 1;
  unrank_continuation(r % continuations_[f + 1], f + 1, h);
  return h;
}

void HistoryIndexer::visit_from(int k, LatentHistory& h, const std::function<void(const LatentHistory&)>& visit) const {
  const int K = design_.periods();
  if (k == K) {
    visit(h);
    return;
  }
  const int first = design_.first_occasion(k);
  const int t = design_.occasions_in(k);
  for (std::uint64_t q = 0; q < (std::uint64_t{1} << t); ++q) {
    for (int l = 0; l < t; ++l) h.states[static_cast<std::size_t>(first + l)] = ((q >> (t - 1 - l)) & 1u) ? 2 : 1;
    visit_from(k + 1, h, visit);
  }
  for (int l = 0; l < t; ++l) h.states[static_cast<std::size_t>(first + l)] = 3;
  visit_from(k + 1, h, visit);
  for (int o = first; o < design_.total_occasions(); ++o) h.states[static_cast<std::size_t>(o)] = 4;
  visit(h);
}

void HistoryIndexer::for_each(const std::function<void(const LatentHistory&)>& visit) const {
  const int K = design_.periods();
  LatentHistory h;
  h.states.assign(static_cast<std::size_t>(design_.total_occasions()), 0);
  for (int f = 0; f < K; ++f) {
    std::fill(h.states.begin(), h.states.end(), 0);
    const int first = design_.first_occasion(f);
    const int t = design_.occasions_in(f);
    for (std::uint64_t q = 0; q < (std::uint64_t{1} << t); ++q) {
      for (int l = 0; l < t; ++l) h.states[static_cast<std::size_t>(first + l)] = ((q >> (t - 1 - l)) & 1u) ? 2 : 1;
      visit_from(f + 1, h, visit);
    }
  }
}

std::vector<LatentHistory> enumerate_valid_histories(const StudyDesign& design) {
  HistoryIndexer idx(design);
  std::vector<LatentHistory> out;
  out.reserve(idx.count());
  idx.for_each([&](const LatentHistory& h) { out.push_back(h); });
  return out;
}

namespace {
Matrix4 sub4(const Latent5<double>& m) {
  Matrix4 r{};
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 4; ++y) r[x][y] = m[x + 1][y + 1];
  return r;
}
}  // namespace

Matrix4 within_period_transition(const ParameterSet& theta, const StudyDesign& design, int k, int l) {
  if (k < 0 || k >= design.periods() || l < 0 || l + 1 >= design.occasions_in(k)) {
    throw InputError(fmt::format("no within-period transition after occasion {} of period {}", l + 1, k + 1));
  }
  Matrix4 m{};
  const double p = theta.p.at(static_cast<std::size_t>(design.occasion(k, l + 1)));
  for (int x : {0, 1}) {
    m[x][0] = 1.0 - p;
    m[x][1] = p;
  }
  m[2][2] = 1.0;
  m[3][3] = 1.0;
  return m;
}

Matrix4 between_period_transition(const ParameterSet& theta, const StudyDesign& design, int k, EmigrationFamily family) {
  if (k < 0 || k + 1 >= design.periods()) {
    throw InputError(fmt::format("no between-period transition after period {}", k + 1));
  }
  const auto tr = build_transitions<double>(theta, design, family);
  return sub4(tr.step[static_cast<std::size_t>(design.first_occasion(k + 1))]);
}

namespace {
double log_history_probability(const LatentHistory& h, const LatentTransitions<double>& tr) {
  double lp = std::log(tr.init[h[0]]);
  for (std::size_t o = 1; o < h.size(); ++o) lp += std::log(tr.step[o][h[o - 1]][h[o]]);
  return lp;
}
}  // namespace

double history_probability(const LatentHistory& h, const ParameterSet& theta, const StudyDesign& design,
                           EmigrationFamily family) {
  if (!is_valid_history(h, design)) return 0.0;
  const auto tr = build_transitions<double>(theta, design, family);
  return std::exp(log_history_probability(h, tr));
}

std::vector<double> probability_vector(const StudyDesign& design, const ParameterSet& theta, EmigrationFamily family) {
  HistoryIndexer idx(design);
  const auto tr = build_transitions<double>(theta, design, family);
  std::vector<double> pi;
  pi.reserve(idx.count());
  idx.for_each([&](const LatentHistory& h) { pi.push_back(std::exp(log_history_probability(h, tr))); });
  return pi;
}

}  // namespace lmte
