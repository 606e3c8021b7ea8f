#pragma once

#include <memory>
#include <span>
#include <vector>

#include "lmte/likelihood.hpp"
#include "lmte/parametrization.hpp"

namespace lmte {

inline constexpr double kDefaultSigmaP = 2.5;

/// Sum of squared logits / (2 sigma_p^2) over every free probability
/// parameter of `par` (log(N - M) is not penalized).
double penalty(const Parametrization& par, std::span<const double> u, double sigma_p = kDefaultSigmaP);

/// Penalty for a list of probabilities given on the natural scale.
double penalty_of_probabilities(std::span<const double> probabilities, double sigma_p = kDefaultSigmaP);

enum class LikelihoodKind { Saddlepoint, ExactID };

struct ObjectiveValue {
  double objective = 0.0;  // -loglik + penalty, minimized
  double loglik = 0.0;
  double penalty = 0.0;
};

/// Penalized negative log-likelihood over the unconstrained parameters.
///
/// The saddlepoint gradient is exact: partial derivatives at the fixed
/// saddlepoint come from forward-mode dual numbers, and the movement of the
/// saddlepoint enters the log-determinant through implicit differentiation.
/// Each instance keeps the last saddlepoint as a warm start, so give every
/// concurrent optimization its own copy.
class PenalizedObjective {
 public:
  PenalizedObjective(std::shared_ptr<const LikelihoodEngine> engine, Parametrization par,
                     double sigma_p = kDefaultSigmaP, LikelihoodKind kind = LikelihoodKind::Saddlepoint);

  std::size_t dimension() const { return par_.size(); }
  const Parametrization& parametrization() const { return par_; }
  const LikelihoodEngine& engine() const { return *engine_; }
  double sigma_p() const { return sigma_p_; }
  LikelihoodKind kind() const { return kind_; }

  /// Throws EvaluationError when the likelihood cannot be evaluated at u.
  ObjectiveValue evaluate(std::span<const double> u, std::vector<double>* gradient = nullptr) const;

 private:
  double loglik_gradient_saddlepoint(std::span<const double> u, std::vector<double>* gradient) const;
  double loglik_gradient_exact(std::span<const double> u, std::vector<double>* gradient) const;

  std::shared_ptr<const LikelihoodEngine> engine_;
  Parametrization par_;
  double sigma_p_;
  LikelihoodKind kind_;
  mutable Eigen::VectorXd warm_;
};

}  // namespace lmte
