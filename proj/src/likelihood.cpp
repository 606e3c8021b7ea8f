#include "lmte/likelihood.hpp"

#include <cmath>
#include <numeric>

#include <boost/math/special_functions/digamma.hpp>
#include <fmt/format.h>

namespace lmte {

namespace {

double lgamma_of(double x) { return std::lgamma(x); }

template <std::size_t D>
Dual<D> lgamma_of(const Dual<D>& x) {
  Dual<D> r;
  r.v = std::lgamma(x.v);
  const double slope = boost::math::digamma(x.v);
  for (std::size_t i = 0; i < D; ++i) r.d[i] = slope * x.d[i];
  return r;
}

}  // namespace

std::string to_string(BackendKind b) {
  switch (b) {
    case BackendKind::Auto: return "auto";
    case BackendKind::Explicit: return "explicit";
    case BackendKind::Transfer: return "transfer";
  }
  return "auto";
}

void LikelihoodEngine::build_backend(const std::vector<int>& rows) {
  const auto& layout = data_.layout;
  if (backend_ == BackendKind::Transfer) {
    transfer_ = std::make_shared<TransferCgf>(layout, rows);
    explicit_.reset();
  } else {
    explicit_ = std::make_shared<ExplicitCgf>(design(), layout, rows);
    transfer_.reset();
  }
}

LikelihoodEngine::LikelihoodEngine(ObservedData data, EmigrationFamily family, const ParameterSet& reference,
                                   EngineOptions options)
    : data_(std::move(data)), family_(family), options_(options) {
  const auto& layout = data_.layout;
  validate_design(design(), family_);
  check_shape(reference, design(), family_);
  if (std::all_of(data_.y.begin(), data_.y.end(), [](std::int64_t v) { return v == 0; })) {
    throw InputError("dataset has no observations");
  }
  histories_ = HistoryIndexer(design()).count();

  backend_ = options_.backend;
  if (backend_ == BackendKind::Auto) {
    backend_ = (layout.scenario() == Scenario::BM && histories_ > options_.explicit_limit) ? BackendKind::Transfer
                                                                                          : BackendKind::Explicit;
  }
  if (backend_ == BackendKind::Transfer && layout.scenario() != Scenario::BM) {
    throw InputError("the transfer-matrix backend applies to batch-mark data only");
  }
  for (const auto& d : layout.dropped()) diagnostics_.push_back(fmt::format("structurally empty row {} omitted", d));

  std::vector<int> all(layout.size());
  std::iota(all.begin(), all.end(), 0);
  build_backend(all);
  retained_ = all;

  // Rank screening on the support of the reference parameters.
  ParameterSet unit = reference;
  unit.N = 1.0;
  const std::vector<double> zero(all.size(), 0.0);
  const auto c0 = evaluate_double(unit, zero, kWithHessian);
  Eigen::MatrixXd E = hessian_matrix(c0);
  const Eigen::VectorXd mu = to_eigen(c0.grad);
  E += mu * mu.transpose();
  const auto scr = screen_rows(E);
  for (std::size_t i = 0; i < scr.dropped.size(); ++i) {
    const int row = scr.dropped[i];
    double implied = 0.0;
    for (std::size_t k = 0; k < scr.retained.size(); ++k) {
      implied += scr.coefficients[i][k] * static_cast<double>(data_.y[static_cast<std::size_t>(scr.retained[k])]);
    }
    const double observed = static_cast<double>(data_.y[static_cast<std::size_t>(row)]);
    if (std::abs(observed - implied) > 1e-6 * std::max(1.0, std::abs(observed))) {
      throw InputError(fmt::format("inconsistent counts: {} = {} but the other counts imply {}",
                                   layout.label(static_cast<std::size_t>(row)), observed, implied));
    }
    diagnostics_.push_back(fmt::format("row {} is linearly dependent on earlier rows and was dropped",
                                       layout.label(static_cast<std::size_t>(row))));
  }
  dropped_ = scr.dropped;
  if (!scr.dropped.empty()) {
    retained_ = scr.retained;
    build_backend(retained_);
  }
  if (layout.scenario() == Scenario::ID) {
    id_cells_ = scr.dropped.empty() ? explicit_ : std::make_shared<ExplicitCgf>(design(), layout, all);
  }

  target_.resize(static_cast<Eigen::Index>(retained_.size()));
  for (std::size_t i = 0; i < retained_.size(); ++i) {
    target_(static_cast<Eigen::Index>(i)) = static_cast<double>(data_.y[static_cast<std::size_t>(retained_[i])]);
  }

  // Boundary data have no finite saddlepoint; detect that once, here. Every
  // entry of A is nonnegative, so a zero count is always on the boundary.
  // Other faces show up as a Newton path that creeps off to infinity: it
  // converges only linearly, so the probe asks for full accuracy.
  ParameterSet probe = reference;
  const double M = data_.marked_total();
  if (!(probe.N > M)) probe.N = 2.0 * M + 1.0;
  SaddlepointOptions strict = options_.saddlepoint;
  strict.tolerance = std::min(strict.tolerance, 1e-12);
  auto solvable = [&]() {
    if ((target_.array() <= 0.0).any()) return false;
    try {
      const auto p = prepare<double>(probe);
      CgfFunction K = [&](std::span<const double> s, int order) { return evaluate<double>(p, s, order); };
      const auto sol = solve_saddlepoint(target_, K, strict);
      return sol.converged && sol.s.cwiseAbs().maxCoeff() <= options_.interior_limit;
    } catch (const EvaluationError&) {
      return false;
    }
  };
  if (solvable()) return;
  if (!options_.support_adjustment) {
    throw InputError("observed counts lie on the boundary of the support; the saddlepoint equation has no solution");
  }
  adjusted_ = true;
  bool any_zero = false;
  for (Eigen::Index r = 0; r < target_.size(); ++r) {
    if (target_(r) == 0.0) {
      target_(r) = 0.5;
      any_zero = true;
      diagnostics_.push_back(
          fmt::format("zero count {} replaced by 1/2", layout.label(static_cast<std::size_t>(retained_[r]))));
    }
  }
  if (any_zero && solvable()) return;

  const std::vector<double> zr(retained_.size(), 0.0);
  const Eigen::VectorXd interior = to_eigen(evaluate_double(probe, zr, kWithGradient).grad);
  const Eigen::VectorXd base = target_;
  double lambda = 0.5 / std::max(1.0, base.cwiseAbs().maxCoeff());
  for (int attempt = 0; attempt < 12 && lambda <= 1.0; ++attempt, lambda *= 2.0) {
    target_ = base + lambda * (interior - base);
    if (solvable()) {
      diagnostics_.push_back(fmt::format("counts blended toward the interior of the support with weight {:.3g}", lambda));
      return;
    }
  }
  throw InputError("could not move the observed counts into the interior of the support");
}

template <class S>
LikelihoodEngine::Prepared<S> LikelihoodEngine::prepare(const BasicParameterSet<S>& theta) const {
  Prepared<S> p;
  p.transitions = build_transitions<S>(theta, design(), family_);
  if (explicit_) p.mass = explicit_->signature_mass(p.transitions);
  p.N = theta.N;
  return p;
}

template <class S>
CgfValue<S> LikelihoodEngine::evaluate(const Prepared<S>& p, std::span<const S> s, int order) const {
  if (explicit_) return explicit_->evaluate<S>(p.mass, p.N, s, order);
  return transfer_->evaluate<S>(p.transitions, p.N, s, order);
}

CgfValue<double> LikelihoodEngine::evaluate_double(const ParameterSet& theta, std::span<const double> s,
                                                   int order) const {
  const auto p = prepare<double>(theta);
  return evaluate<double>(p, s, order);
}

SaddlepointSolution LikelihoodEngine::solve(const ParameterSet& theta, const Eigen::VectorXd* warm) const {
  const auto p = prepare<double>(theta);
  CgfFunction K = [&](std::span<const double> s, int order) { return evaluate<double>(p, s, order); };
  return solve_saddlepoint(target_, K, options_.saddlepoint, warm);
}

double LikelihoodEngine::saddlepoint_loglik(const ParameterSet& theta, SaddlepointSolution* solution,
                                            const Eigen::VectorXd* warm) const {
  if (!(theta.N > 0.0)) throw InputError("N must be positive");
  auto sol = solve(theta, warm);
  const double ll = saddlepoint_log_density(sol, target_);
  if (solution != nullptr) *solution = std::move(sol);
  return ll;
}

template <class S>
S LikelihoodEngine::exact_id_loglik(const BasicParameterSet<S>& theta) const {
  using std::log;
  if (!id_cells_) throw InputError("the exact likelihood requires individually identified data");
  const double n = data_.marked_total();
  if (!(value_of(theta.N) >= n)) {
    throw InputError(fmt::format("N = {} is below the number of observed individuals {}", value_of(theta.N), n));
  }
  const auto tr = build_transitions<S>(theta, design(), family_);
  const auto mass = id_cells_->signature_mass(tr);
  S ll = lgamma_of(theta.N + 1.0) - lgamma_of(theta.N - n + 1.0);
  for (std::size_t c = 1; c < mass.size(); ++c) {
    const auto& rows = id_cells_->signature_rows(c);
    const double y = static_cast<double>(data_.y[static_cast<std::size_t>(rows.at(0))]);
    if (y == 0.0) continue;
    if (!(value_of(mass[c]) > 0.0)) return S(-std::numeric_limits<double>::infinity());
    ll += y * log(mass[c]) - std::lgamma(y + 1.0);
  }
  const S unobserved = theta.N - n;
  if (value_of(unobserved) > 0.0) ll += unobserved * log(mass[0]);
  return ll;
}

template LikelihoodEngine::Prepared<double> LikelihoodEngine::prepare<double>(const ParameterSet&) const;
template LikelihoodEngine::Prepared<GradDual> LikelihoodEngine::prepare<GradDual>(
    const BasicParameterSet<GradDual>&) const;
template CgfValue<double> LikelihoodEngine::evaluate<double>(const Prepared<double>&, std::span<const double>,
                                                             int) const;
template CgfValue<GradDual> LikelihoodEngine::evaluate<GradDual>(const Prepared<GradDual>&,
                                                                 std::span<const GradDual>, int) const;
template double LikelihoodEngine::exact_id_loglik<double>(const ParameterSet&) const;
template GradDual LikelihoodEngine::exact_id_loglik<GradDual>(const BasicParameterSet<GradDual>&) const;

double log_likelihood_saddlepoint(const ObservedData& y, const ParameterSet& theta, double N, const StudyDesign& design,
                                  EmigrationFamily family, const EngineOptions& options) {
  if (!(design == y.design())) throw InputError("dataset design does not match");
  ParameterSet th = theta;
  th.N = N;
  LikelihoodEngine engine(y, family, th, options);
  return engine.saddlepoint_loglik(th);
}

double log_likelihood_exact_id(const ObservedData& y, const ParameterSet& theta, double N, const StudyDesign& design,
                               EmigrationFamily family) {
  if (!(design == y.design())) throw InputError("dataset design does not match");
  if (y.layout.scenario() != Scenario::ID) throw InputError("the exact likelihood requires individually identified data");
  if (N < y.marked_total()) throw InputError("N is below the number of observed individuals");
  ParameterSet th = theta;
  th.N = N;
  LikelihoodEngine engine(y, family, th, EngineOptions{BackendKind::Explicit, 200000, true, 20.0, {}});
  return engine.exact_id_loglik<double>(th);
}

}  // namespace lmte
