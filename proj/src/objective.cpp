#include "lmte/objective.hpp"

#include <cmath>

#include <fmt/format.h>

namespace lmte {

double penalty(const Parametrization& par, std::span<const double> u, double sigma_p) {
  if (!(sigma_p > 0.0)) throw InputError("sigma_p must be positive");
  const auto& free = par.free_parameters();
  if (u.size() != free.size()) throw InputError("parameter vector has the wrong length");
  double p = 0.0;
  for (std::size_t j = 0; j < free.size(); ++j) {
    if (free[j].group != Group::LogN) p += u[j] * u[j];
  }
  return p / (2.0 * sigma_p * sigma_p);
}

double penalty_of_probabilities(std::span<const double> probabilities, double sigma_p) {
  if (!(sigma_p > 0.0)) throw InputError("sigma_p must be positive");
  double p = 0.0;
  for (double v : probabilities) {
    const double l = logit(v);
    p += l * l;
  }
  return p / (2.0 * sigma_p * sigma_p);
}

PenalizedObjective::PenalizedObjective(std::shared_ptr<const LikelihoodEngine> engine, Parametrization par,
                                       double sigma_p, LikelihoodKind kind)
    : engine_(std::move(engine)), par_(std::move(par)), sigma_p_(sigma_p), kind_(kind) {
  if (!(sigma_p_ > 0.0)) throw InputError("sigma_p must be positive");
  if (!(par_.design() == engine_->design())) throw InputError("parametrization and data use different designs");
  if (par_.family() != engine_->family()) throw InputError("parametrization and likelihood use different families");
}

ObjectiveValue PenalizedObjective::evaluate(std::span<const double> u, std::vector<double>* gradient) const {
  if (u.size() != dimension()) throw InputError("parameter vector has the wrong length");
  for (double v : u) {
    if (!std::isfinite(v)) throw EvaluationError("non-finite parameter value");
  }
  ObjectiveValue out;
  out.loglik = kind_ == LikelihoodKind::Saddlepoint ? loglik_gradient_saddlepoint(u, gradient)
                                                    : loglik_gradient_exact(u, gradient);
  if (!std::isfinite(out.loglik)) throw EvaluationError("log-likelihood is not finite");
  out.penalty = penalty(par_, u, sigma_p_);
  out.objective = -out.loglik + out.penalty;
  if (gradient != nullptr) {
    const auto& free = par_.free_parameters();
    const double inv = 1.0 / (sigma_p_ * sigma_p_);
    for (std::size_t j = 0; j < free.size(); ++j) {
      (*gradient)[j] = -(*gradient)[j] + (free[j].group == Group::LogN ? 0.0 : u[j] * inv);
    }
  }
  return out;
}

double PenalizedObjective::loglik_gradient_saddlepoint(std::span<const double> u, std::vector<double>* gradient) const {
  const auto theta = par_.from_unconstrained(u);
  SaddlepointSolution sol;
  const double ll = engine_->saddlepoint_loglik(theta, &sol, warm_.size() > 0 ? &warm_ : nullptr);
  warm_ = sol.s;
  if (gradient == nullptr) return ll;

  const std::size_t n = dimension();
  const auto R = sol.s.size();
  const Eigen::MatrixXd H = hessian_matrix(sol.at);
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) throw EvaluationError("CGF Hessian is not positive definite");
  const Eigen::MatrixXd Hinv = llt.solve(Eigen::MatrixXd::Identity(R, R));
  const Eigen::VectorXd& target = engine_->target();

  gradient->assign(n, 0.0);
  for (std::size_t start = 0; start < n; start += kDualWidth) {
    const std::size_t width = std::min(kDualWidth, n - start);
    std::vector<GradDual> ud(u.begin(), u.end());
    for (std::size_t i = 0; i < width; ++i) ud[start + i] = GradDual::variable(u[start + i], i);
    const auto theta_d = par_.from_unconstrained<GradDual>(std::span<const GradDual>(ud));
    const auto prepared = engine_->prepare<GradDual>(theta_d);

    std::vector<GradDual> sd(static_cast<std::size_t>(R));
    for (Eigen::Index r = 0; r < R; ++r) sd[static_cast<std::size_t>(r)] = GradDual(sol.s(r));
    const auto first = engine_->evaluate<GradDual>(prepared, sd, kWithGradient);

    // Saddlepoint sensitivity: grad K(s(u); u) = y gives ds/du = -H^{-1} d(grad K)/du.
    Eigen::MatrixXd G(R, static_cast<Eigen::Index>(width));
    for (Eigen::Index r = 0; r < R; ++r)
      for (std::size_t i = 0; i < width; ++i) G(r, static_cast<Eigen::Index>(i)) = first.grad[static_cast<std::size_t>(r)].d[i];
    const Eigen::MatrixXd dS = -llt.solve(G);
    for (Eigen::Index r = 0; r < R; ++r) {
      for (std::size_t i = 0; i < width; ++i) sd[static_cast<std::size_t>(r)].d[i] = dS(r, static_cast<Eigen::Index>(i));
    }
    const auto second = engine_->evaluate<GradDual>(prepared, sd, kWithHessian);
    for (std::size_t i = 0; i < width; ++i) {
      double trace = 0.0;
      for (Eigen::Index a = 0; a < R; ++a)
        for (Eigen::Index b = 0; b < R; ++b) {
          const double dh = 0.5 * (second.hess[static_cast<std::size_t>(a * R + b)].d[i] +
                                   second.hess[static_cast<std::size_t>(b * R + a)].d[i]);
          trace += Hinv(a, b) * dh;
        }
      // (grad K - y)' ds/du vanishes at an exact root; keep it for the computed one.
      double slack = 0.0;
      for (Eigen::Index r = 0; r < R; ++r) slack += (sol.at.grad[static_cast<std::size_t>(r)] - target(r)) * dS(r, static_cast<Eigen::Index>(i));
      (*gradient)[start + i] = first.value.d[i] + slack - 0.5 * trace;
    }
  }
  return ll;
}

double PenalizedObjective::loglik_gradient_exact(std::span<const double> u, std::vector<double>* gradient) const {
  if (gradient == nullptr) return engine_->exact_id_loglik<double>(par_.from_unconstrained(u));
  const std::size_t n = dimension();
  gradient->assign(n, 0.0);
  double ll = 0.0;
  for (std::size_t start = 0; start < n; start += kDualWidth) {
    const std::size_t width = std::min(kDualWidth, n - start);
    std::vector<GradDual> ud(u.begin(), u.end());
    for (std::size_t i = 0; i < width; ++i) ud[start + i] = GradDual::variable(u[start + i], i);
    const auto v = engine_->exact_id_loglik<GradDual>(par_.from_unconstrained<GradDual>(std::span<const GradDual>(ud)));
    ll = v.v;
    for (std::size_t i = 0; i < width; ++i) (*gradient)[start + i] = v.d[i];
  }
  return ll;
}

}  // namespace lmte
