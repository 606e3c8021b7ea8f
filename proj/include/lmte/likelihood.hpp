#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lmte/cgf.hpp"
#include "lmte/parameters.hpp"
#include "lmte/saddlepoint.hpp"

namespace lmte {

enum class BackendKind { Auto, Explicit, Transfer };

std::string to_string(BackendKind b);

struct EngineOptions {
  BackendKind backend = BackendKind::Auto;
  /// Histories above which Auto switches batch-mark data to the transfer backend.
  std::uint64_t explicit_limit = 200000;
  /// Move boundary data into the interior of the support (zero counts first,
  /// then a small blend toward an interior point) when the saddlepoint
  /// equation has no finite solution. When off such data are rejected.
  bool support_adjustment = true;
  /// A probe solution with ||s||_inf above this sits numerically on the
  /// boundary (tilt factors below e^-20) and counts as unsolvable.
  double interior_limit = 20.0;
  SaddlepointOptions saddlepoint;
};

/// Saddlepoint (and, for ID data, exact multinomial) likelihood of one
/// dataset under one emigration family. Construction screens the observed
/// rows for linear dependence and fixes the count vector the saddlepoint is
/// solved at; both are then shared by every evaluation.
class LikelihoodEngine {
 public:
  /// `reference` supplies the support pattern for rank screening and the
  /// point at which boundary data are detected.
  LikelihoodEngine(ObservedData data, EmigrationFamily family, const ParameterSet& reference, EngineOptions options = {});

  const ObservedData& data() const { return data_; }
  const StudyDesign& design() const { return data_.design(); }
  EmigrationFamily family() const { return family_; }
  BackendKind backend() const { return backend_; }
  std::uint64_t histories() const { return histories_; }
  const std::vector<int>& retained() const { return retained_; }
  const std::vector<int>& dropped() const { return dropped_; }
  /// Count vector over the retained rows, after any support adjustment.
  const Eigen::VectorXd& target() const { return target_; }
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }
  /// True when the counts were moved into the interior of the support.
  bool adjusted() const { return adjusted_; }

  template <class S>
  struct Prepared {
    LatentTransitions<S> transitions;
    std::vector<S> mass;  // explicit backend only
    S N;
  };

  template <class S>
  Prepared<S> prepare(const BasicParameterSet<S>& theta) const;

  template <class S>
  CgfValue<S> evaluate(const Prepared<S>& prepared, std::span<const S> s, int order) const;

  SaddlepointSolution solve(const ParameterSet& theta, const Eigen::VectorXd* warm = nullptr) const;

  /// Saddlepoint log-likelihood; throws EvaluationError when the saddlepoint
  /// equation cannot be solved at theta.
  double saddlepoint_loglik(const ParameterSet& theta, SaddlepointSolution* solution = nullptr,
                            const Eigen::VectorXd* warm = nullptr) const;

  /// Exact multinomial log-likelihood (ID data only).
  template <class S>
  S exact_id_loglik(const BasicParameterSet<S>& theta) const;

 private:
  CgfValue<double> evaluate_double(const ParameterSet& theta, std::span<const double> s, int order) const;
  void build_backend(const std::vector<int>& rows);

  ObservedData data_;
  EmigrationFamily family_;
  EngineOptions options_;
  BackendKind backend_ = BackendKind::Explicit;
  std::uint64_t histories_ = 0;
  std::vector<int> retained_;
  std::vector<int> dropped_;
  Eigen::VectorXd target_;
  std::vector<std::string> diagnostics_;
  bool adjusted_ = false;
  std::shared_ptr<const ExplicitCgf> explicit_;
  std::shared_ptr<const TransferCgf> transfer_;
  std::shared_ptr<const ExplicitCgf> id_cells_;  // all ID rows, for the exact likelihood
};

/// One-shot saddlepoint log-likelihood at (theta, N).
double log_likelihood_saddlepoint(const ObservedData& y, const ParameterSet& theta, double N, const StudyDesign& design,
                                  EmigrationFamily family, const EngineOptions& options = {});

/// Exact multinomial log-likelihood for ID data at (theta, N).
double log_likelihood_exact_id(const ObservedData& y, const ParameterSet& theta, double N, const StudyDesign& design,
                               EmigrationFamily family);

}  // namespace lmte
