#include "lmte/parametrization.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace lmte {

ModelSpec named_model(const std::string& name) {
  ModelSpec m;
  m.name = name;
  auto& e = m.emigration;
  if (name == "note" || name == "NoTE") {
    m.name = "note";
    e.family = EmigrationFamily::None;
  } else if (name == "rand_t" || name == "rand_c") {
    e.family = EmigrationFamily::CompletelyRandom;
    e.alpha_time_varying = name == "rand_t";
    if (!e.alpha_time_varying) m.constraints.alpha_prime = GroupConstraint::constant();
  } else if (name == "acbc" || name == "acbt" || name == "atbc" || name == "atbt") {
    e.family = EmigrationFamily::Markovian;
    e.alpha_time_varying = name[1] == 't';
    e.beta_time_varying = name[3] == 't';
    if (!e.alpha_time_varying) m.constraints.alpha = GroupConstraint::constant();
    if (!e.beta_time_varying) m.constraints.beta = GroupConstraint::constant();
  } else {
    throw InputError(fmt::format("unknown model '{}' (known: note, rand_t, rand_c, acbc, acbt, atbc, atbt)", name));
  }
  return m;
}

std::vector<std::string> named_model_list() { return {"note", "rand_t", "acbc", "acbt", "atbc", "atbt"}; }

std::string display_label(const ModelSpec& m) {
  if (m.name == "note") return "NoTE";
  if (m.name == "rand_t") return "alpha'_t";
  if (m.name == "rand_c") return "alpha'_c";
  if (m.name.size() == 4 && m.name[0] == 'a') {
    return fmt::format("alpha_{}beta_{}", m.name[1], m.name[3]);
  }
  return m.name;
}

ModelSpec closed_population(ModelSpec m) {
  m.constraints.gamma_star = GroupConstraint::fixed_at({1.0, 0.0});
  m.constraints.phi = GroupConstraint::fixed_at({1.0});
  if (m.name.find("closed") == std::string::npos) m.name += "_closed";
  return m;
}

bool Parametrization::pins_final(const GroupConstraint& g, std::size_t size) const {
  return g.tie == Tie::Fixed || (g.tie == Tie::Constant && size >= 2);
}

namespace {

std::string occasion_label(const StudyDesign& d, int o) {
  return fmt::format("{},{}", d.period_of(o) + 1, d.position_of(o) + 1);
}

void check_fixed(const GroupConstraint& g, std::size_t size, const char* name) {
  if (g.tie != Tie::Fixed || size == 0) return;
  if (g.fixed.size() != 1 && g.fixed.size() != size) {
    // gamma_star fixed vectors may be given with a leading 1 and zeros.
    if (std::string(name) != "gamma_star" || g.fixed.size() > size) {
      throw InputError(fmt::format("fixed values for '{}' must have 1 or {} entries", name, size));
    }
  }
  for (double v : g.fixed) {
    if (!(v >= 0.0 && v <= 1.0)) throw InputError(fmt::format("fixed value {} for '{}' is not a probability", v, name));
  }
}

}  // namespace

Parametrization::Parametrization(const StudyDesign& design, const ModelSpec& model, double marked_total)
    : design_(validate_design(design, model.emigration.family)), model_(model), marked_total_(marked_total) {
  const std::size_t K = static_cast<std::size_t>(design_.periods());
  const std::size_t T = static_cast<std::size_t>(design_.total_occasions());
  auto& c = model_.constraints;
  const auto fam = family();

  // Closed-population entry vectors are given in short form (1, 0); pad.
  if (c.gamma_star.tie == Tie::Fixed && c.gamma_star.fixed.size() > 1 && c.gamma_star.fixed.size() != K - 1) {
    auto& g = c.gamma_star.fixed;
    const bool zero_tail = std::all_of(g.begin() + std::min(g.size(), K - 1), g.end(), [](double v) { return v == 0.0; });
    if (zero_tail) g.resize(K - 1, 0.0);
  }
  check_fixed(c.gamma_star, K - 1, "gamma_star");
  check_fixed(c.phi, K - 1, "phi");
  check_fixed(c.p, T, "p");
  check_fixed(c.alpha_prime, K - 1, "alpha_prime");
  check_fixed(c.alpha, K - 1, "alpha");
  check_fixed(c.beta, K >= 2 ? K - 2 : 0, "beta");

  // With alpha fixed at zero nobody emigrates, so beta never enters the likelihood.
  if (fam == EmigrationFamily::Markovian && c.alpha.tie == Tie::Fixed && c.beta.tie != Tie::Fixed &&
      std::all_of(c.alpha.fixed.begin(), c.alpha.fixed.end(), [](double v) { return v == 0.0; })) {
    c.beta = GroupConstraint::fixed_at({0.5});
  }

  if (fam != EmigrationFamily::None && c.final_product_reparam) {
    bool pinned = pins_final(c.phi, K - 1);
    if (fam == EmigrationFamily::CompletelyRandom) pinned = pinned || pins_final(c.alpha_prime, K - 1);
    if (fam == EmigrationFamily::Markovian) {
      pinned = pinned || pins_final(c.alpha, K - 1);
      if (K >= 3) pinned = pinned || pins_final(c.beta, K - 2);
    }
    reparam_ = !pinned;
  }

  free_.push_back({Group::LogN, -1, "log(N-M)"});
  auto add_group = [&](Group g, std::size_t size, const GroupConstraint& gc, const char* base, bool confounded,
                       int display_offset) {
    if (size == 0 || gc.tie == Tie::Fixed) return;
    if (gc.tie == Tie::Constant && !(confounded && size == 1)) {
      free_.push_back({g, -1, base});
      return;
    }
    const std::size_t n = confounded ? size - 1 : size;
    for (std::size_t i = 0; i < n; ++i) {
      free_.push_back({g, static_cast<int>(i), fmt::format("{}[{}]", base, i + display_offset)});
    }
  };
  add_group(Group::GammaStar, K - 1, c.gamma_star, "gamma_star", false, 1);
  add_group(Group::Phi, K - 1, c.phi, "phi", reparam_, 1);
  if (c.p.tie == Tie::TimeVarying) {
    for (std::size_t o = 0; o < T; ++o) {
      free_.push_back({Group::P, static_cast<int>(o), fmt::format("p[{}]", occasion_label(design_, static_cast<int>(o)))});
    }
  } else {
    add_group(Group::P, T, c.p, "p", false, 1);
  }
  if (fam == EmigrationFamily::CompletelyRandom) add_group(Group::AlphaPrime, K - 1, c.alpha_prime, "alpha_prime", reparam_, 1);
  if (fam == EmigrationFamily::Markovian) {
    add_group(Group::Alpha, K - 1, c.alpha, "alpha", reparam_, 1);
    add_group(Group::Beta, K >= 2 ? K - 2 : 0, c.beta, "beta", reparam_, 2);
  }
  if (reparam_) {
    if (fam == EmigrationFamily::CompletelyRandom) {
      free_.push_back({Group::Eta, -1, "eta"});
    } else {
      free_.push_back({Group::Eta1, -1, "eta1"});
      if (K >= 3) free_.push_back({Group::Eta2, -1, "eta2"});
    }
  }

  // Reported names mirror `reported<S>`.
  const int Ki = static_cast<int>(K);
  reported_names_.push_back("N");
  if (c.gamma_star.tie != Tie::Fixed) {
    for (int k = 0; k < Ki; ++k) reported_names_.push_back(fmt::format("gamma[{}]", k + 1));
  }
  const int identifiable = reparam_ ? Ki - 2 : Ki - 1;
  if (c.phi.tie != Tie::Fixed) {
    for (int k = 0; k < identifiable; ++k) reported_names_.push_back(fmt::format("phi[{}]", k + 1));
  }
  if (c.p.tie != Tie::Fixed) {
    for (int o = 0; o < design_.total_occasions(); ++o) {
      reported_names_.push_back(fmt::format("p[{}]", occasion_label(design_, o)));
    }
  }
  if (fam == EmigrationFamily::CompletelyRandom && c.alpha_prime.tie != Tie::Fixed) {
    for (int k = 0; k < identifiable; ++k) reported_names_.push_back(fmt::format("alpha_prime[{}]", k + 1));
  }
  if (fam == EmigrationFamily::Markovian) {
    if (c.alpha.tie != Tie::Fixed) {
      for (int k = 0; k < identifiable; ++k) reported_names_.push_back(fmt::format("alpha[{}]", k + 1));
    }
    if (c.beta.tie != Tie::Fixed) {
      const int nb = reparam_ ? Ki - 3 : Ki - 2;
      for (int b = 0; b < nb; ++b) reported_names_.push_back(fmt::format("beta[{}]", b + 2));
    }
  }
  if (reparam_) {
    if (fam == EmigrationFamily::CompletelyRandom) {
      reported_names_.push_back("eta");
    } else {
      reported_names_.push_back("eta1");
      if (Ki >= 3) reported_names_.push_back("eta2");
    }
  }
}

std::vector<double> Parametrization::to_unconstrained(const ParameterSet& params) const {
  const int K = design_.periods();
  check_shape(params, design_, family());
  if (!(params.N > marked_total_)) {
    throw InputError(fmt::format("N = {} must exceed the number of marked individuals {}", params.N, marked_total_));
  }
  auto interior = [](double v, const std::string& name) {
    if (!(v > 0.0 && v < 1.0)) {
      throw InputError(fmt::format("free parameter {} = {} is on the boundary of (0, 1)", name, v));
    }
    return logit(v);
  };
  std::vector<double> u;
  u.reserve(free_.size());
  const auto fam = family();
  for (const auto& f : free_) {
    auto entry = [&](const std::vector<double>& v) { return v.at(f.index < 0 ? 0 : static_cast<std::size_t>(f.index)); };
    switch (f.group) {
      case Group::LogN: u.push_back(std::log(params.N - marked_total_)); break;
      case Group::GammaStar: u.push_back(interior(entry(params.gamma_star), f.name)); break;
      case Group::Phi: u.push_back(interior(entry(params.phi), f.name)); break;
      case Group::P: u.push_back(interior(entry(params.p), f.name)); break;
      case Group::AlphaPrime: u.push_back(interior(entry(params.alpha_prime), f.name)); break;
      case Group::Alpha: u.push_back(interior(entry(params.alpha), f.name)); break;
      case Group::Beta: u.push_back(interior(entry(params.beta), f.name)); break;
      case Group::Eta:
        u.push_back(interior(params.phi[K - 2] * (1.0 - params.alpha_prime[K - 2]), f.name));
        break;
      case Group::Eta1:
        u.push_back(interior(params.phi[K - 2] * (1.0 - params.emigration(fam, K - 2)), f.name));
        break;
      case Group::Eta2: u.push_back(interior(params.phi[K - 2] * params.beta[K - 3], f.name)); break;
    }
  }
  return u;
}

std::vector<NamedValue> Parametrization::truth_quantities(const ParameterSet& truth, const StudyDesign& design,
                                                          EmigrationFamily family) {
  const int K = design.periods();
  std::vector<NamedValue> out;
  out.push_back({"N", truth.N});
  const auto g = truth.gamma();
  for (int k = 0; k < K; ++k) out.push_back({fmt::format("gamma[{}]", k + 1), g[k]});
  for (int k = 0; k + 1 < K; ++k) out.push_back({fmt::format("phi[{}]", k + 1), truth.phi[k]});
  for (int o = 0; o < design.total_occasions(); ++o) out.push_back({fmt::format("p[{}]", occasion_label(design, o)), truth.p[o]});
  for (int k = 0; k + 1 < K; ++k) {
    const double a = truth.emigration(family, k);
    if (family == EmigrationFamily::CompletelyRandom) out.push_back({fmt::format("alpha_prime[{}]", k + 1), a});
    if (family == EmigrationFamily::Markovian) out.push_back({fmt::format("alpha[{}]", k + 1), a});
    if (family == EmigrationFamily::None) {
      out.push_back({fmt::format("alpha_prime[{}]", k + 1), 0.0});
      out.push_back({fmt::format("alpha[{}]", k + 1), 0.0});
    }
  }
  if (family == EmigrationFamily::Markovian) {
    for (int b = 0; b + 2 < K; ++b) out.push_back({fmt::format("beta[{}]", b + 2), truth.beta[b]});
  }
  if (K >= 2) {
    const double phi_f = truth.phi[K - 2];
    const double a_f = truth.emigration(family, K - 2);
    out.push_back({"eta", phi_f * (1.0 - a_f)});
    out.push_back({"eta1", phi_f * (1.0 - a_f)});
    if (family == EmigrationFamily::Markovian && K >= 3) out.push_back({"eta2", phi_f * truth.beta[K - 3]});
  }
  return out;
}

}  // namespace lmte
