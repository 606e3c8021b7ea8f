#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmte/objective.hpp"

namespace lmte {

struct FitOptions {
  double sigma_p = kDefaultSigmaP;
  /// Number of optimizer starts; the first is the neutral point.
  int restarts = 10;
  std::uint64_t seed = 1;
  int threads = 1;
  /// Convergence: ||gradient||_inf on the unconstrained scale.
  double gradient_tolerance = 1e-6;
  int max_iterations = 2000;
  LikelihoodKind likelihood = LikelihoodKind::Saddlepoint;
  EngineOptions engine;
  bool compute_intervals = true;
  /// Relative step of the finite-difference Hessian of the gradient.
  double hessian_step = 1e-4;
};

/// One reported quantity on the natural scale with its 95% Wald interval.
struct Estimate {
  std::string name;
  double value = 0.0;
  double se = 0.0;  // delta method, natural scale
  double lower = 0.0;
  double upper = 0.0;
  bool interval = false;  // false when the Hessian was unusable
};

struct Convergence {
  bool converged = false;
  double gradient_norm = 0.0;
  int iterations = 0;
  int restart = -1;  // index of the start that produced the optimum
  int starts = 0;
  int starts_converged = 0;  // quasi-Newton phase ended with ||gradient||_inf <= 1e-3
  std::string message;
};

struct FitResult {
  ModelSpec model;
  std::string label;
  ParameterSet estimates;
  std::vector<std::string> parameter_names;  // unconstrained coordinates
  std::vector<double> u;
  std::vector<double> se;  // unconstrained scale
  std::vector<Estimate> reported;
  double loglik = 0.0;  // unpenalized, at the optimum
  double penalty = 0.0;
  double penalized_objective = 0.0;
  int nparams = 0;
  double aic = 0.0;
  bool hessian_ok = false;
  Convergence convergence;
  std::vector<std::string> diagnostics;

  const Estimate* find(const std::string& name) const;
};

/// Raised when no optimizer start produced a finite objective.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double aic(int nparams, double loglik);

/// Neutral start: every logit 0 and N = 2 M.
std::vector<double> neutral_start(const Parametrization& par);

/// Maximizes loglik - penalty by L-BFGS from several starts, then refines the
/// best candidates by Newton steps on the gradient. A result whose best start
/// missed the gradient criterion is returned with `convergence.converged == false`.
FitResult fit(const ObservedData& data, const ModelSpec& model, const FitOptions& options = {});
FitResult fit(std::shared_ptr<const LikelihoodEngine> engine, const ModelSpec& model, const FitOptions& options = {});

/// Engine whose probe point is the neutral start of `model`.
std::shared_ptr<const LikelihoodEngine> make_engine(const ObservedData& data, const ModelSpec& model,
                                                    const EngineOptions& options = {});

}  // namespace lmte
