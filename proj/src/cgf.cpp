#include "lmte/cgf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace lmte {

namespace {

std::vector<int> positions(std::size_t rows, const std::vector<int>& retained) {
  std::vector<int> pos(rows, -1);
  for (std::size_t i = 0; i < retained.size(); ++i) {
    const int r = retained[i];
    if (r < 0 || static_cast<std::size_t>(r) >= rows) throw InputError(fmt::format("retained row {} out of range", r));
    pos[static_cast<std::size_t>(r)] = static_cast<int>(i);
  }
  return pos;
}

}  // namespace

// ---------------------------------------------------------------------------
// Explicit backend

void ExplicitCgf::add_column(std::span<const LinkMatrix::Entry> col,
                             std::map<std::vector<std::pair<int, int>>, int>& index) {
  std::vector<std::pair<int, int>> key;
  for (const auto& e : col) {
    const int p = position_[static_cast<std::size_t>(e.row)];
    if (p >= 0) key.emplace_back(p, e.count);
  }
  std::sort(key.begin(), key.end());
  auto [it, fresh] = index.try_emplace(key, static_cast<int>(sigs_.size()));
  if (fresh) {
    Signature sig;
    for (const auto& [p, c] : key) {
      sig.rows.push_back(p);
      sig.counts.push_back(c);
    }
    sigs_.push_back(std::move(sig));
  }
  sig_of_.push_back(static_cast<std::uint32_t>(it->second));
}

ExplicitCgf::ExplicitCgf(const LinkMatrix& A, std::vector<int> retained)
    : retained_(std::move(retained)), position_(positions(A.rows(), retained_)) {
  std::map<std::vector<std::pair<int, int>>, int> index;
  index.emplace(std::vector<std::pair<int, int>>{}, 0);
  sigs_.push_back({});
  sig_of_.reserve(A.cols());
  for (std::size_t j = 0; j < A.cols(); ++j) add_column(A.column(j), index);
}

ExplicitCgf::ExplicitCgf(const StudyDesign& design, const ObservedLayout& layout, std::vector<int> retained)
    : retained_(std::move(retained)), position_(positions(layout.size(), retained_)) {
  std::map<std::vector<std::pair<int, int>>, int> index;
  index.emplace(std::vector<std::pair<int, int>>{}, 0);
  sigs_.push_back({});
  HistoryIndexer idx(design);
  occasions_ = design.total_occasions();
  sig_of_.reserve(idx.count());
  states_.reserve(idx.count() * static_cast<std::size_t>(occasions_));
  std::vector<LinkMatrix::Entry> col;
  idx.for_each([&](const LatentHistory& h) {
    auto rows = contributions(h, layout);
    std::sort(rows.begin(), rows.end());
    col.clear();
    for (std::size_t i = 0; i < rows.size();) {
      std::size_t j = i;
      while (j < rows.size() && rows[j] == rows[i]) ++j;
      col.push_back({rows[i], static_cast<int>(j - i)});
      i = j;
    }
    add_column(col, index);
    states_.insert(states_.end(), h.states.begin(), h.states.end());
  });
}

std::vector<double> ExplicitCgf::mass_from_pi(std::span<const double> pi) const {
  if (pi.size() != sig_of_.size()) throw InputError("probability vector does not match the link matrix");
  std::vector<double> m(sigs_.size(), 0.0);
  for (std::size_t j = 0; j < pi.size(); ++j) m[sig_of_[j]] += pi[j];
  return m;
}

template <class S>
std::vector<S> ExplicitCgf::signature_mass(const LatentTransitions<S>& tr) const {
  if (states_.empty()) throw InputError("explicit backend was built without latent histories");
  const std::size_t T = static_cast<std::size_t>(occasions_);
  std::vector<S> mass(sigs_.size(), S(0.0));
  // Canonical order keeps long common prefixes; reuse their partial products.
  std::vector<S> prefix(T);
  const std::uint8_t* prev = nullptr;
  for (std::size_t j = 0; j < sig_of_.size(); ++j) {
    const std::uint8_t* h = states_.data() + j * T;
    std::size_t start = 0;
    if (prev != nullptr) {
      while (start < T && prev[start] == h[start]) ++start;
    }
    if (start == 0) {
      prefix[0] = tr.init[h[0]];
      start = 1;
    }
    for (std::size_t o = start; o < T; ++o) prefix[o] = prefix[o - 1] * tr.step[o][h[o - 1]][h[o]];
    mass[sig_of_[j]] += prefix[T - 1];
    prev = h;
  }
  return mass;
}

template <class S>
CgfValue<S> ExplicitCgf::evaluate(std::span<const S> mass, const S& N, std::span<const S> s, int order) const {
  using std::exp;
  using std::log;
  const std::size_t R = retained_.size();
  if (s.size() != R) throw InputError(fmt::format("s has {} entries, expected {}", s.size(), R));
  if (mass.size() != sigs_.size()) throw InputError("signature mass vector has the wrong size");

  std::vector<S> t(sigs_.size(), S(0.0));
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < sigs_.size(); ++c) {
    const auto& sig = sigs_[c];
    for (std::size_t i = 0; i < sig.rows.size(); ++i) t[c] += static_cast<double>(sig.counts[i]) * s[sig.rows[i]];
    if (value_of(mass[c]) > 0.0) top = std::max(top, value_of(t[c]));
  }
  if (!std::isfinite(top)) throw EvaluationError("cumulant generating function has no positive mass");

  CgfValue<S> out;
  std::vector<S> w(sigs_.size());
  S total(0.0);
  for (std::size_t c = 0; c < sigs_.size(); ++c) {
    w[c] = value_of(mass[c]) > 0.0 ? mass[c] * exp(t[c] - top) : S(0.0);
    total += w[c];
  }
  if (!(value_of(total) > 0.0) || !std::isfinite(value_of(total))) {
    throw EvaluationError("cumulant generating function overflowed");
  }
  out.value = N * (log(total) + top);
  if (order < kWithGradient) return out;

  const S inv = 1.0 / total;
  std::vector<S> mu(R, S(0.0));
  for (std::size_t c = 0; c < sigs_.size(); ++c) {
    if (value_of(w[c]) == 0.0) continue;
    const auto& sig = sigs_[c];
    for (std::size_t i = 0; i < sig.rows.size(); ++i) mu[sig.rows[i]] += static_cast<double>(sig.counts[i]) * w[c];
  }
  for (auto& m : mu) m *= inv;
  out.grad.resize(R);
  for (std::size_t r = 0; r < R; ++r) out.grad[r] = N * mu[r];
  if (order < kWithHessian) return out;

  std::vector<S> second(R * R, S(0.0));
  for (std::size_t c = 0; c < sigs_.size(); ++c) {
    if (value_of(w[c]) == 0.0) continue;
    const auto& sig = sigs_[c];
    for (std::size_t i = 0; i < sig.rows.size(); ++i) {
      const S wi = static_cast<double>(sig.counts[i]) * w[c];
      for (std::size_t k = 0; k < sig.rows.size(); ++k) {
        second[static_cast<std::size_t>(sig.rows[i]) * R + sig.rows[k]] += static_cast<double>(sig.counts[k]) * wi;
      }
    }
  }
  out.hess.resize(R * R);
  for (std::size_t a = 0; a < R; ++a)
    for (std::size_t b = 0; b < R; ++b) out.hess[a * R + b] = N * (second[a * R + b] * inv - mu[a] * mu[b]);
  return out;
}

// ---------------------------------------------------------------------------
// Transfer-matrix backend

namespace {

struct AugmentedIndex {
  int K;
  int zero() const { return 0; }
  int uncaptured(int m) const { return 1 + m; }
  int emigrant(int m) const { return 1 + (K + 1) + m; }
  int first(int m) const { return 1 + 2 * (K + 1) + (m - 1); }
  int recapture(int m) const { return 1 + 2 * (K + 1) + K + (m - 1); }
  int dead() const { return 1 + 2 * (K + 1) + 2 * K; }
  int size() const { return dead() + 1; }

  int latent(int x) const {
    if (x == 0) return 0;
    if (x < emigrant(0)) return 1;
    if (x < first(1)) return 3;
    if (x < dead()) return 2;
    return 4;
  }
  int mark(int x) const {
    if (x == 0 || x == dead()) return 0;
    if (x < emigrant(0)) return x - uncaptured(0);
    if (x < first(1)) return x - emigrant(0);
    if (x < recapture(1)) return x - first(1) + 1;
    return x - recapture(1) + 1;
  }
  bool is_first(int x) const { return x >= first(1) && x < recapture(1); }
  bool is_recapture(int x) const { return x >= recapture(1) && x < dead(); }

  /// Augmented state reached from x when the latent chain moves to b on an
  /// occasion of period k.
  int next(int x, int b, int k) const {
    const int m = mark(x);
    switch (b) {
      case 0: return zero();
      case 1: return uncaptured(m);
      case 2: return m == 0 ? first(k + 1) : recapture(m);
      case 3: return emigrant(m);
      default: return dead();
    }
  }
};

bool allowed(int a, int b, bool within) {
  if (within) {
    if (a == 0) return b == 0;
    if (a == 1 || a == 2) return b == 1 || b == 2;
    return a == b;
  }
  if (a == 0) return b <= 2;
  if (a == 4) return b == 4;
  return b >= 1;
}

}  // namespace

TransferCgf::TransferCgf(const ObservedLayout& layout, std::vector<int> retained) : retained_(std::move(retained)) {
  if (layout.scenario() != Scenario::BM) throw InputError("the transfer-matrix backend requires a BM layout");
  const auto& d = layout.design();
  const auto pos = positions(layout.size(), retained_);
  AugmentedIndex ax{d.periods()};
  states_ = ax.size();
  occasions_ = d.total_occasions();
  const std::size_t T = static_cast<std::size_t>(occasions_);
  moves_.assign(T, {});
  event_.assign(T, std::vector<int>(static_cast<std::size_t>(states_), -1));
  emissions_.assign(T, {});

  std::vector<char> active(static_cast<std::size_t>(states_), 0);
  for (int b = 0; b <= 2; ++b) {
    const int x = ax.next(ax.zero(), b, 0);
    init_.emplace_back(x, static_cast<std::uint8_t>(b));
    active[static_cast<std::size_t>(x)] = 1;
  }
  auto record_events = [&](std::size_t o, const std::vector<char>& act) {
    for (int x = 0; x < states_; ++x) {
      if (!act[static_cast<std::size_t>(x)]) continue;
      int row = -1;
      if (ax.is_first(x)) row = layout.first_capture_row(static_cast<int>(o));
      if (ax.is_recapture(x)) {
        row = layout.recapture_row(static_cast<int>(o), ax.mark(x) - 1);
        if (row < 0) throw InputError("batch-mark layout has no row for a reachable recapture");
      }
      if (row < 0) continue;
      const int p = pos[static_cast<std::size_t>(row)];
      event_[o][static_cast<std::size_t>(x)] = p;
      if (p >= 0) emissions_[o].push_back({x, p});
    }
  };
  record_events(0, active);
  for (std::size_t o = 1; o < T; ++o) {
    const bool within = d.position_of(static_cast<int>(o)) > 0;
    const int k = d.period_of(static_cast<int>(o));
    std::vector<char> next(static_cast<std::size_t>(states_), 0);
    for (int x = 0; x < states_; ++x) {
      if (!active[static_cast<std::size_t>(x)]) continue;
      const int a = ax.latent(x);
      for (int b = 0; b < kLatentStates; ++b) {
        if (!allowed(a, b, within)) continue;
        const int y = ax.next(x, b, k);
        moves_[o].push_back({x, y, static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b)});
        next[static_cast<std::size_t>(y)] = 1;
      }
    }
    active = std::move(next);
    record_events(o, active);
  }
}

template <class S>
CgfValue<S> TransferCgf::evaluate(const LatentTransitions<S>& tr, const S& N, std::span<const S> s, int order) const {
  using std::exp;
  using std::log;
  const std::size_t R = retained_.size();
  if (s.size() != R) throw InputError(fmt::format("s has {} entries, expected {}", s.size(), R));
  const std::size_t T = static_cast<std::size_t>(occasions_);
  const std::size_t X = static_cast<std::size_t>(states_);

  std::vector<S> es(R);
  for (std::size_t r = 0; r < R; ++r) {
    if (!std::isfinite(value_of(s[r])) || value_of(s[r]) > 700.0) throw EvaluationError("saddlepoint argument overflow");
    es[r] = exp(s[r]);
  }
  auto weight = [&](std::size_t o, std::size_t x, S& v) {
    const int p = event_[o][x];
    if (p >= 0) v *= es[static_cast<std::size_t>(p)];
  };

  std::vector<S> alpha(T * X, S(0.0));
  std::vector<S> scale(T);
  auto normalize = [&](std::size_t o) {
    S c(0.0);
    for (std::size_t x = 0; x < X; ++x) c += alpha[o * X + x];
    if (!(value_of(c) > 0.0) || !std::isfinite(value_of(c))) {
      throw EvaluationError("cumulant generating function has no positive mass or overflowed");
    }
    const S inv = 1.0 / c;
    for (std::size_t x = 0; x < X; ++x) alpha[o * X + x] *= inv;
    scale[o] = c;
  };
  for (const auto& [x, b] : init_) alpha[static_cast<std::size_t>(x)] += tr.init[b];
  for (std::size_t x = 0; x < X; ++x) weight(0, x, alpha[x]);
  normalize(0);
  for (std::size_t o = 1; o < T; ++o) {
    S* cur = alpha.data() + o * X;
    const S* prev = alpha.data() + (o - 1) * X;
    const auto& M = tr.step[o];
    for (const auto& mv : moves_[o]) {
      if (value_of(prev[mv.from]) == 0.0) continue;
      cur[mv.to] += prev[mv.from] * M[mv.a][mv.b];
    }
    for (std::size_t x = 0; x < X; ++x) weight(o, x, cur[x]);
    normalize(o);
  }

  CgfValue<S> out;
  S logm(0.0);
  for (std::size_t o = 0; o < T; ++o) logm += log(scale[o]);
  out.value = N * logm;
  if (order < kWithGradient) return out;

  std::vector<S> beta(T * X, S(0.0));
  for (std::size_t x = 0; x < X; ++x) beta[(T - 1) * X + x] = S(1.0);
  std::vector<S> wb(X);
  for (std::size_t o = T - 1; o >= 1; --o) {
    const S* nb = beta.data() + o * X;
    S* cur = beta.data() + (o - 1) * X;
    for (std::size_t x = 0; x < X; ++x) {
      wb[x] = nb[x];
      weight(o, x, wb[x]);
    }
    const auto& M = tr.step[o];
    for (const auto& mv : moves_[o]) cur[mv.from] += M[mv.a][mv.b] * wb[mv.to];
    const S inv = 1.0 / scale[o];
    for (std::size_t x = 0; x < X; ++x) cur[x] *= inv;
  }

  std::vector<S> mu(R, S(0.0));
  for (std::size_t o = 0; o < T; ++o) {
    for (const auto& e : emissions_[o]) {
      mu[static_cast<std::size_t>(e.position)] += alpha[o * X + e.state] * beta[o * X + e.state];
    }
  }
  out.grad.resize(R);
  for (std::size_t r = 0; r < R; ++r) out.grad[r] = N * mu[r];
  if (order < kWithHessian) return out;

  // Ordered pairs of emitting occasions o1 < o2: carry the forward mass of
  // one emitting state ahead and close it with the backward variables.
  std::vector<S> pair(R * R, S(0.0));
  std::vector<S> v(X), nv(X);
  for (std::size_t o1 = 0; o1 + 1 < T; ++o1) {
    for (const auto& e1 : emissions_[o1]) {
      std::fill(v.begin(), v.end(), S(0.0));
      v[static_cast<std::size_t>(e1.state)] = alpha[o1 * X + e1.state];
      const std::size_t r = static_cast<std::size_t>(e1.position);
      for (std::size_t o2 = o1 + 1; o2 < T; ++o2) {
        std::fill(nv.begin(), nv.end(), S(0.0));
        const auto& M = tr.step[o2];
        bool any = false;
        for (const auto& mv : moves_[o2]) {
          if (value_of(v[mv.from]) == 0.0) continue;
          nv[mv.to] += v[mv.from] * M[mv.a][mv.b];
          any = true;
        }
        if (!any) break;
        const S inv = 1.0 / scale[o2];
        for (std::size_t x = 0; x < X; ++x) {
          weight(o2, x, nv[x]);
          nv[x] *= inv;
        }
        for (const auto& e2 : emissions_[o2]) {
          pair[r * R + static_cast<std::size_t>(e2.position)] += nv[e2.state] * beta[o2 * X + e2.state];
        }
        std::swap(v, nv);
      }
    }
  }
  out.hess.resize(R * R);
  for (std::size_t a = 0; a < R; ++a) {
    for (std::size_t b = 0; b < R; ++b) {
      S second = pair[a * R + b] + pair[b * R + a];
      if (a == b) second += mu[a];
      out.hess[a * R + b] = N * (second - mu[a] * mu[b]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

CgfValue<double> cgf(std::span<const double> s, const CgfContext& ctx, int order) {
  if (ctx.A == nullptr) throw InputError("CGF context has no link matrix");
  ExplicitCgf ex(*ctx.A, ctx.retained);
  const auto mass = ex.mass_from_pi(ctx.pi);
  return ex.evaluate<double>(mass, ctx.N, s, order);
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd hessian_matrix(const CgfValue<double>& c) {
  const auto R = static_cast<Eigen::Index>(c.grad.size());
  Eigen::MatrixXd H(R, R);
  for (Eigen::Index a = 0; a < R; ++a)
    for (Eigen::Index b = 0; b < R; ++b) H(a, b) = c.hess[static_cast<std::size_t>(a * R + b)];
  return 0.5 * (H + H.transpose());
}

template std::vector<double> ExplicitCgf::signature_mass<double>(const LatentTransitions<double>&) const;
template std::vector<GradDual> ExplicitCgf::signature_mass<GradDual>(const LatentTransitions<GradDual>&) const;
template CgfValue<double> ExplicitCgf::evaluate<double>(std::span<const double>, const double&, std::span<const double>,
                                                        int) const;
template CgfValue<GradDual> ExplicitCgf::evaluate<GradDual>(std::span<const GradDual>, const GradDual&,
                                                            std::span<const GradDual>, int) const;
template CgfValue<double> TransferCgf::evaluate<double>(const LatentTransitions<double>&, const double&,
                                                        std::span<const double>, int) const;
template CgfValue<GradDual> TransferCgf::evaluate<GradDual>(const LatentTransitions<GradDual>&, const GradDual&,
                                                            std::span<const GradDual>, int) const;

}  // namespace lmte
