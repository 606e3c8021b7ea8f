#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lmte/cgf.hpp"

namespace lmte {

struct SaddlepointOptions {
  /// Acceptance: ||grad K(s) - y||_inf <= tolerance * max(1, ||y||_inf).
  double tolerance = 1e-9;
  /// Newton keeps iterating down to this level while it still improves.
  double target = 1e-13;
  int max_iterations = 200;
  /// ||s||_inf beyond this is treated as running off to the boundary.
  double divergence = 35.0;
  /// A root is accepted only if the next Newton step would be this small.
  double step_tolerance = 1e-3;
};

struct SaddlepointSolution {
  Eigen::VectorXd s;
  CgfValue<double> at;  // value, gradient and Hessian at s
  int iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool diverged = false;  // ran off toward the boundary of the support
};

using CgfFunction = std::function<CgfValue<double>(std::span<const double> s, int order)>;

/// Newton iteration with step halving on h(s) = s'y - K(s), from s = 0 or
/// from `start`.
SaddlepointSolution solve_saddlepoint(const Eigen::VectorXd& y, const CgfFunction& K,
                                      const SaddlepointOptions& options = {}, const Eigen::VectorXd* start = nullptr);

/// K(s) - s'y - (1/2) log det(2 pi Hessian) at a converged solution.
double saddlepoint_log_density(const SaddlepointSolution& sol, const Eigen::VectorXd& y);

/// Greedy in-order selection of linearly independent observed rows from the
/// uncentred second-moment matrix E[a a'] of one individual's contribution.
/// Row i is dropped when it is (numerically) a combination of the rows kept
/// before it; `coefficients` stores that combination.
struct RowScreening {
  std::vector<int> retained;
  std::vector<int> dropped;
  std::vector<std::vector<double>> coefficients;  // per dropped row, over `retained`
};

RowScreening screen_rows(const Eigen::MatrixXd& second_moment, double relative_tolerance = 1e-9);

}  // namespace lmte
