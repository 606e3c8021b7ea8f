#include "lmte/saddlepoint.hpp"

#include <cmath>

#include <fmt/format.h>

namespace lmte {

namespace {

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

Eigen::VectorXd newton_step(const Eigen::MatrixXd& H, const Eigen::VectorXd& rhs) {
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() == Eigen::Success) return llt.solve(rhs);
  // Nearly singular Hessian: a small ridge keeps the direction an ascent one.
  const double ridge = 1e-10 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
  Eigen::MatrixXd Hr = H;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Hr.diagonal().array() += ridge * std::pow(100.0, attempt);
    Eigen::LLT<Eigen::MatrixXd> r(Hr);
    if (r.info() == Eigen::Success) return r.solve(rhs);
  }
  throw EvaluationError("singular CGF Hessian in the saddlepoint solve");
}

}  // namespace

SaddlepointSolution solve_saddlepoint(const Eigen::VectorXd& y, const CgfFunction& K, const SaddlepointOptions& options,
                                      const Eigen::VectorXd* start) {
  const Eigen::Index R = y.size();
  const double scale = std::max(1.0, inf_norm(y));
  SaddlepointSolution sol;
  sol.s = (start != nullptr && start->size() == R && start->allFinite()) ? *start : Eigen::VectorXd::Zero(R);

  auto eval = [&](const Eigen::VectorXd& s, int order) {
    return K(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), order);
  };
  CgfValue<double> cur;
  try {
    cur = eval(sol.s, kWithHessian);
  } catch (const EvaluationError&) {
    if (start == nullptr) throw;
    sol.s.setZero();
    cur = eval(sol.s, kWithHessian);
  }
  for (int it = 0; it <= options.max_iterations; ++it) {
    sol.iterations = it;
    const Eigen::VectorXd g = to_eigen(cur.grad);
    const Eigen::VectorXd rhs = y - g;
    sol.residual = inf_norm(rhs);
    if (sol.residual <= options.target * scale) break;
    if (it == options.max_iterations) break;

    const Eigen::VectorXd delta = newton_step(hessian_matrix(cur), rhs);
    const double h0 = sol.s.dot(y) - cur.value;
    // h is summed from terms of size |K|; changes below this are rounding.
    const double noise = 1e-11 * std::max(1.0, std::abs(cur.value) + std::abs(sol.s.dot(y)));
    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial;
    CgfValue<double> next;
    for (int halving = 0; halving < 50; ++halving, t *= 0.5) {
      trial = sol.s + t * delta;
      try {
        next = eval(trial, kWithHessian);
        const double h1 = trial.dot(y) - next.value;
        if (!std::isfinite(h1)) continue;
        if (h1 > h0 + noise) {
          accepted = true;
        } else if (h1 >= h0 - noise) {
          // Within rounding of h: fall back to the residual as the merit.
          accepted = inf_norm(y - to_eigen(next.grad)) < sol.residual;
        }
        if (accepted) break;
      } catch (const EvaluationError&) {
      }
    }
    if (!accepted) break;
    sol.s = trial;
    cur = std::move(next);
    if (inf_norm(sol.s) > options.divergence) {
      sol.diverged = true;
      break;
    }
  }
  if (!sol.diverged && sol.residual <= options.tolerance * scale) {
    // Near a face of the support the residual shrinks while s keeps moving
    // by O(1) per step; an interior root has a vanishing Newton step.
    const Eigen::VectorXd rhs = y - to_eigen(cur.grad);
    if (inf_norm(newton_step(hessian_matrix(cur), rhs)) > options.step_tolerance) sol.diverged = true;
  }
  sol.at = std::move(cur);
  sol.converged = !sol.diverged && sol.residual <= options.tolerance * scale;
  return sol;
}

double saddlepoint_log_density(const SaddlepointSolution& sol, const Eigen::VectorXd& y) {
  if (!sol.converged) throw EvaluationError("saddlepoint equation was not solved");
  const Eigen::MatrixXd H = hessian_matrix(sol.at);
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) throw EvaluationError("CGF Hessian is not positive definite at the saddlepoint");
  const Eigen::VectorXd d = llt.matrixL().toDenseMatrix().diagonal();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) logdet += 2.0 * std::log(d(i));
  const double R = static_cast<double>(y.size());
  return sol.at.value - sol.s.dot(y) - 0.5 * (R * std::log(2.0 * M_PI) + logdet);
}

RowScreening screen_rows(const Eigen::MatrixXd& E, double relative_tolerance) {
  const Eigen::Index n = E.rows();
  RowScreening out;
  const double top = n == 0 ? 0.0 : E.diagonal().cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double eii = E(i, i);
    const auto m = static_cast<Eigen::Index>(out.retained.size());
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(m);
    double residual = eii;
    if (m > 0 && eii > 0.0) {
      Eigen::MatrixXd Ess(m, m);
      Eigen::VectorXd Esi(m);
      for (Eigen::Index a = 0; a < m; ++a) {
        Esi(a) = E(out.retained[a], i);
        for (Eigen::Index b = 0; b < m; ++b) Ess(a, b) = E(out.retained[a], out.retained[b]);
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(Ess);
      coef = ldlt.solve(Esi);
      residual = eii - Esi.dot(coef);
    }
    if (eii > 1e-14 * top && residual > relative_tolerance * eii) {
      out.retained.push_back(static_cast<int>(i));
    } else {
      out.dropped.push_back(static_cast<int>(i));
      out.coefficients.emplace_back(coef.data(), coef.data() + coef.size());
    }
  }
  for (auto& c : out.coefficients) c.resize(out.retained.size(), 0.0);
  return out;
}

}  // namespace lmte
