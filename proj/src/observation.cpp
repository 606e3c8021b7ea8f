#include "lmte/observation.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace lmte {

std::string to_string(Scenario s) { return s == Scenario::ID ? "ID" : "BM"; }
std::string to_string(Aggregation a) { return a == Aggregation::Occasion ? "occasion" : "period"; }

Scenario scenario_from_string(const std::string& s) {
  if (s == "ID" || s == "id") return Scenario::ID;
  if (s == "BM" || s == "bm") return Scenario::BM;
  throw InputError(fmt::format("unknown scenario '{}' (expected ID or BM)", s));
}

Aggregation aggregation_from_string(const std::string& s) {
  if (s == "occasion") return Aggregation::Occasion;
  if (s == "period") return Aggregation::Period;
  throw InputError(fmt::format("unknown aggregation '{}' (expected occasion or period)", s));
}

ObservedLayout ObservedLayout::individual(const StudyDesign& design) {
  ObservedLayout L;
  L.scenario_ = Scenario::ID;
  L.design_ = validate_design(design);
  const int T = L.design_.total_occasions();
  if (T > 24) throw InputError(fmt::format("ID layout supports at most 24 occasions, design has {}", T));
  const std::uint64_t n = (std::uint64_t{1} << T) - 1;
  L.rows_.reserve(n);
  for (std::uint64_t b = 1; b <= n; ++b) L.rows_.push_back({RowId::Kind::History, b});
  return L;
}

ObservedLayout ObservedLayout::batch(const StudyDesign& design, Aggregation aggregation) {
  ObservedLayout L;
  L.scenario_ = Scenario::BM;
  L.aggregation_ = aggregation;
  L.design_ = validate_design(design);
  const auto& d = L.design_;
  const int K = d.periods();
  const int T = d.total_occasions();
  L.first_row_.assign(static_cast<std::size_t>(T), -1);
  L.recapture_row_.assign(static_cast<std::size_t>(T), std::vector<int>(static_cast<std::size_t>(K), -1));

  auto add = [&](RowId r) {
    L.rows_.push_back(r);
    return static_cast<int>(L.rows_.size() - 1);
  };
  if (aggregation == Aggregation::Occasion) {
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < d.occasions_in(k); ++l) {
        L.first_row_[d.occasion(k, l)] = add({RowId::Kind::FirstCapture, 0, -1, k, l});
      }
    L.m_rows_ = L.rows_.size();
    for (int k = 0; k < K; ++k)
      for (int t = k; t < K; ++t)
        for (int l = (t == k ? 1 : 0); l < d.occasions_in(t); ++l) {
          L.recapture_row_[d.occasion(t, l)][k] = add({RowId::Kind::Recapture, 0, k, t, l});
        }
  } else {
    for (int k = 0; k < K; ++k) {
      const int r = add({RowId::Kind::FirstCapture, 0, -1, k, -1});
      for (int l = 0; l < d.occasions_in(k); ++l) L.first_row_[d.occasion(k, l)] = r;
    }
    L.m_rows_ = L.rows_.size();
    for (int k = 0; k < K; ++k)
      for (int t = k; t < K; ++t) {
        if (t == k && d.occasions_in(k) == 1) {
          L.dropped_.push_back(fmt::format("n[{},{}]", k + 1, t + 1));
          continue;
        }
        const int r = add({RowId::Kind::Recapture, 0, k, t, -1});
        for (int l = (t == k ? 1 : 0); l < d.occasions_in(t); ++l) L.recapture_row_[d.occasion(t, l)][k] = r;
      }
  }
  if (aggregation == Aggregation::Occasion) {
    for (int k = 0; k < K; ++k) {
      if (d.occasions_in(k) == 1) L.dropped_.push_back(fmt::format("n[{},{},*]", k + 1, k + 1));
    }
  }
  return L;
}

int ObservedLayout::recapture_row(int o, int mark_period) const {
  const auto& row = recapture_row_.at(static_cast<std::size_t>(o));
  if (mark_period < 0 || mark_period >= static_cast<int>(row.size())) return -1;
  return row[static_cast<std::size_t>(mark_period)];
}

int ObservedLayout::history_row(std::uint64_t bits) const {
  if (scenario_ != Scenario::ID) throw InputError("history_row requires an ID layout");
  if (bits == 0 || bits > rows_.size()) return -1;
  return static_cast<int>(bits - 1);
}

std::string ObservedLayout::label(std::size_t i) const {
  const RowId& r = rows_.at(i);
  switch (r.kind) {
    case RowId::Kind::History: {
      const int T = design_.total_occasions();
      std::string s(static_cast<std::size_t>(T), '0');
      for (int o = 0; o < T; ++o) {
        if ((r.history >> (T - 1 - o)) & 1u) s[static_cast<std::size_t>(o)] = '1';
      }
      return s;
    }
    case RowId::Kind::FirstCapture:
      return r.position < 0 ? fmt::format("m[{}]", r.period + 1) : fmt::format("m[{},{}]", r.period + 1, r.position + 1);
    case RowId::Kind::Recapture:
      return r.position < 0 ? fmt::format("n[{},{}]", r.mark_period + 1, r.period + 1)
                            : fmt::format("n[{},{},{}]", r.mark_period + 1, r.period + 1, r.position + 1);
  }
  return {};
}

int ObservedLayout::find(const std::string& lbl) const {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (label(i) == lbl) return static_cast<int>(i);
  }
  return -1;
}

ObservedData::ObservedData(ObservedLayout l, std::vector<std::int64_t> counts)
    : layout(std::move(l)), y(std::move(counts)) {
  if (y.size() != layout.size()) {
    throw InputError(fmt::format("count vector has {} entries, layout expects {}", y.size(), layout.size()));
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0) throw InputError(fmt::format("negative count {} for {}", y[i], layout.label(i)));
  }
}

double ObservedData::marked_total() const {
  const std::size_t n = layout.scenario() == Scenario::ID ? y.size() : layout.first_capture_rows();
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m += static_cast<double>(y[i]);
  return m;
}

std::optional<std::vector<std::uint8_t>> observed_history_of(const LatentHistory& h) {
  std::vector<std::uint8_t> out(h.size(), 0);
  bool any = false;
  for (std::size_t o = 0; o < h.size(); ++o) {
    if (h[o] == 2) {
      out[o] = 1;
      any = true;
    }
  }
  if (!any) return std::nullopt;
  return out;
}

std::vector<int> bm_contributions(const LatentHistory& h, const ObservedLayout& layout) {
  if (layout.scenario() != Scenario::BM) throw InputError("bm_contributions requires a BM layout");
  const auto& d = layout.design();
  std::vector<int> rows;
  int mark = -1;
  for (std::size_t o = 0; o < h.size(); ++o) {
    if (h[o] != 2) continue;
    const int oi = static_cast<int>(o);
    if (mark < 0) {
      mark = d.period_of(oi);
      rows.push_back(layout.first_capture_row(oi));
    } else {
      const int r = layout.recapture_row(oi, mark);
      if (r >= 0) rows.push_back(r);
    }
  }
  return rows;
}

std::vector<int> contributions(const LatentHistory& h, const ObservedLayout& layout) {
  if (layout.scenario() == Scenario::BM) return bm_contributions(h, layout);
  std::uint64_t bits = 0;
  for (std::size_t o = 0; o < h.size(); ++o) bits = (bits << 1) | (h[o] == 2 ? 1u : 0u);
  if (bits == 0) return {};
  return {layout.history_row(bits)};
}

LinkMatrix LinkMatrix::build(const StudyDesign& design, const ObservedLayout& layout) {
  if (!(design == layout.design())) throw InputError("layout was built for a different design");
  HistoryIndexer idx(design);
  LinkMatrix A;
  A.rows_ = layout.size();
  A.col_ptr_.reserve(idx.count() + 1);
  idx.for_each([&](const LatentHistory& h) {
    auto rows = contributions(h, layout);
    std::sort(rows.begin(), rows.end());
    for (std::size_t i = 0; i < rows.size();) {
      std::size_t j = i;
      while (j < rows.size() && rows[j] == rows[i]) ++j;
      A.entries_.push_back({rows[i], static_cast<int>(j - i)});
      i = j;
    }
    A.col_ptr_.push_back(A.entries_.size());
  });
  return A;
}

std::vector<std::int64_t> LinkMatrix::apply(std::span<const std::int64_t> z) const {
  if (z.size() != cols()) throw InputError("latent count vector does not match the link matrix");
  std::vector<std::int64_t> y(rows_, 0);
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (z[j] == 0) continue;
    for (const auto& e : column(j)) y[static_cast<std::size_t>(e.row)] += e.count * z[j];
  }
  return y;
}

std::vector<double> LinkMatrix::apply(std::span<const double> pi) const {
  if (pi.size() != cols()) throw InputError("probability vector does not match the link matrix");
  std::vector<double> y(rows_, 0.0);
  for (std::size_t j = 0; j < pi.size(); ++j) {
    for (const auto& e : column(j)) y[static_cast<std::size_t>(e.row)] += e.count * pi[j];
  }
  return y;
}

LinkMatrix build_link_matrix(const StudyDesign& design, const ObservedLayout& layout) {
  return LinkMatrix::build(design, layout);
}

}  // namespace lmte
