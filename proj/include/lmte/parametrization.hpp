#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "lmte/design.hpp"
#include "lmte/dual.hpp"
#include "lmte/parameters.hpp"

namespace lmte {

enum class Tie { TimeVarying, Constant, Fixed };

/// How one parameter group is estimated. `fixed` holds either one value
/// (broadcast to every entry) or one value per entry.
struct GroupConstraint {
  Tie tie = Tie::TimeVarying;
  std::vector<double> fixed;

  static GroupConstraint time_varying() { return {}; }
  static GroupConstraint constant() { return {Tie::Constant, {}}; }
  static GroupConstraint fixed_at(std::vector<double> v) { return {Tie::Fixed, std::move(v)}; }
};

struct ConstraintMap {
  GroupConstraint gamma_star;
  GroupConstraint phi;
  GroupConstraint p;
  GroupConstraint alpha_prime;
  GroupConstraint alpha;
  GroupConstraint beta;
  /// Replace confounded final-period parameters by their identifiable
  /// products when the model is fully time dependent.
  bool final_product_reparam = true;
};

struct ModelSpec {
  std::string name;
  EmigrationSpec emigration;
  ConstraintMap constraints;
};

/// Named models: note, rand_t, rand_c, acbc, acbt, atbc, atbt.
ModelSpec named_model(const std::string& name);
std::vector<std::string> named_model_list();
std::string display_label(const ModelSpec& m);

/// Fixes entry to the first period and survival to one.
ModelSpec closed_population(ModelSpec m);

enum class Group { LogN, GammaStar, Phi, P, AlphaPrime, Alpha, Beta, Eta1, Eta2, Eta };

struct FreeParameter {
  Group group;
  int index;  // entry within the group, -1 for a single constant value
  std::string name;
};

struct NamedValue {
  std::string name;
  double value;
};

/// Bijection between a model's natural parameters and an unconstrained
/// real vector: log(N - M_total) followed by logits of every free probability,
/// in group order gamma_star, phi, p, alpha_prime/alpha, beta, products.
class Parametrization {
 public:
  Parametrization(const StudyDesign& design, const ModelSpec& model, double marked_total);

  const StudyDesign& design() const { return design_; }
  const ModelSpec& model() const { return model_; }
  EmigrationFamily family() const { return model_.emigration.family; }
  double marked_total() const { return marked_total_; }

  std::size_t size() const { return free_.size(); }
  const std::vector<FreeParameter>& free_parameters() const { return free_; }
  bool reparametrized() const { return reparam_; }

  std::vector<double> to_unconstrained(const ParameterSet& params) const;

  template <class S>
  BasicParameterSet<S> from_unconstrained(std::span<const S> u) const;

  ParameterSet from_unconstrained(std::span<const double> u) const {
    return from_unconstrained<double>(u);
  }

  /// Quantities reported on the natural scale (N, gamma, identifiable phi,
  /// p, emigration parameters, products), in a stable order.
  template <class S>
  std::vector<S> reported(const BasicParameterSet<S>& params) const;
  const std::vector<std::string>& reported_names() const { return reported_names_; }
  /// Index of the first reported quantity that is a probability (all but N).
  static constexpr std::size_t kFirstProbability = 1;

  /// Values of every quantity name this library reports, computed from a
  /// full parameter set of `family` (used for simulation truth).
  static std::vector<NamedValue> truth_quantities(const ParameterSet& truth, const StudyDesign& design,
                                                  EmigrationFamily family);

 private:
  bool pins_final(const GroupConstraint& g, std::size_t size) const;
  template <class S>
  void fill_group(std::vector<S>& out, Group group, std::size_t size, const GroupConstraint& c,
                  std::span<const S> u) const;

  StudyDesign design_;
  ModelSpec model_;
  double marked_total_;
  bool reparam_ = false;
  std::vector<FreeParameter> free_;
  std::vector<std::string> reported_names_;
};

// ---------------------------------------------------------------------------

template <class S>
void Parametrization::fill_group(std::vector<S>& out, Group group, std::size_t size, const GroupConstraint& c,
                                 std::span<const S> u) const {
  out.assign(size, S(0.0));
  if (size == 0) return;
  if (c.tie == Tie::Fixed) {
    for (std::size_t i = 0; i < size; ++i) out[i] = S(c.fixed.size() == 1 ? c.fixed[0] : c.fixed.at(i));
    return;
  }
  for (std::size_t j = 0; j < free_.size(); ++j) {
    const auto& f = free_[j];
    if (f.group != group) continue;
    const S v = expit(u[j]);
    if (f.index < 0) {
      for (auto& o : out) o = v;
    } else {
      out[static_cast<std::size_t>(f.index)] = v;
    }
  }
}

template <class S>
BasicParameterSet<S> Parametrization::from_unconstrained(std::span<const S> u) const {
  using std::exp;
  const std::size_t K = static_cast<std::size_t>(design_.periods());
  const auto& c = model_.constraints;
  BasicParameterSet<S> r;
  r.N = marked_total_ + exp(u[0]);
  fill_group(r.gamma_star, Group::GammaStar, K - 1, c.gamma_star, u);
  fill_group(r.phi, Group::Phi, K - 1, c.phi, u);
  fill_group(r.p, Group::P, static_cast<std::size_t>(design_.total_occasions()), c.p, u);
  const auto fam = family();
  if (fam == EmigrationFamily::CompletelyRandom) fill_group(r.alpha_prime, Group::AlphaPrime, K - 1, c.alpha_prime, u);
  if (fam == EmigrationFamily::Markovian) {
    fill_group(r.alpha, Group::Alpha, K - 1, c.alpha, u);
    fill_group(r.beta, Group::Beta, K - 2, c.beta, u);
  }
  if (reparam_) {
    // Any representative with the same products gives the same likelihood;
    // this one keeps every entry interior.
    S eta1(0.0), eta2(0.0);
    bool has_eta2 = false;
    for (std::size_t j = 0; j < free_.size(); ++j) {
      if (free_[j].group == Group::Eta1 || free_[j].group == Group::Eta) eta1 = expit(u[j]);
      if (free_[j].group == Group::Eta2) {
        eta2 = expit(u[j]);
        has_eta2 = true;
      }
    }
    const S top = (has_eta2 && value_of(eta2) > value_of(eta1)) ? eta2 : eta1;
    const S phi_final = 0.5 * (1.0 + top);
    r.phi[K - 2] = phi_final;
    if (fam == EmigrationFamily::CompletelyRandom) {
      r.alpha_prime[K - 2] = 1.0 - eta1 / phi_final;
    } else {
      r.alpha[K - 2] = 1.0 - eta1 / phi_final;
      if (has_eta2) r.beta[K - 3] = eta2 / phi_final;
    }
  }
  return r;
}

template <class S>
std::vector<S> Parametrization::reported(const BasicParameterSet<S>& params) const {
  const int K = design_.periods();
  const auto& c = model_.constraints;
  const auto fam = family();
  std::vector<S> out;
  out.push_back(params.N);
  if (c.gamma_star.tie != Tie::Fixed) {
    for (const auto& g : params.gamma()) out.push_back(g);
  }
  const int identifiable_phi = reparam_ ? K - 2 : K - 1;
  if (c.phi.tie != Tie::Fixed) {
    for (int k = 0; k < identifiable_phi; ++k) out.push_back(params.phi[k]);
  }
  if (c.p.tie != Tie::Fixed) {
    for (const auto& p : params.p) out.push_back(p);
  }
  if (fam == EmigrationFamily::CompletelyRandom && c.alpha_prime.tie != Tie::Fixed) {
    for (int k = 0; k < identifiable_phi; ++k) out.push_back(params.alpha_prime[k]);
  }
  if (fam == EmigrationFamily::Markovian) {
    if (c.alpha.tie != Tie::Fixed) {
      for (int k = 0; k < identifiable_phi; ++k) out.push_back(params.alpha[k]);
    }
    if (c.beta.tie != Tie::Fixed) {
      const int nb = reparam_ ? K - 3 : K - 2;
      for (int b = 0; b < nb; ++b) out.push_back(params.beta[b]);
    }
  }
  if (reparam_) {
    const S phi_f = params.phi[K - 2];
    if (fam == EmigrationFamily::CompletelyRandom) {
      out.push_back(phi_f * (1.0 - params.alpha_prime[K - 2]));
    } else {
      out.push_back(phi_f * (1.0 - params.alpha[K - 2]));
      if (K >= 3) out.push_back(phi_f * params.beta[K - 3]);
    }
  }
  return out;
}

}  // namespace lmte
