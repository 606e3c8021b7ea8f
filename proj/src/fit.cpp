#include "lmte/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>
#include <fmt/format.h>

#include "lmte/simulate.hpp"

namespace lmte {

namespace {

constexpr double kZ95 = 1.959963984540054;

class CeresObjective final : public ceres::FirstOrderFunction {
 public:
  explicit CeresObjective(PenalizedObjective objective) : objective_(std::move(objective)) {}

  bool Evaluate(const double* x, double* cost, double* gradient) const override {
    const std::size_t n = objective_.dimension();
    try {
      std::vector<double> g;
      const auto v = objective_.evaluate(std::span<const double>(x, n), gradient != nullptr ? &g : nullptr);
      if (!std::isfinite(v.objective)) return false;
      *cost = v.objective;
      if (gradient != nullptr) {
        for (std::size_t i = 0; i < n; ++i) {
          if (!std::isfinite(g[i])) return false;
          gradient[i] = g[i];
        }
      }
      return true;
    } catch (const EvaluationError&) {
      return false;
    } catch (const InputError&) {
      return false;
    }
  }

  int NumParameters() const override { return static_cast<int>(objective_.dimension()); }

 private:
  PenalizedObjective objective_;
};

struct StartOutcome {
  std::vector<double> u;
  double objective = std::numeric_limits<double>::infinity();
  double gradient_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool finite = false;
  bool converged = false;
  std::string message;
};

double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

StartOutcome run_start(const PenalizedObjective& prototype, std::vector<double> u, const FitOptions& options) {
  StartOutcome out;
  ceres::GradientProblemSolver::Options opts;
  opts.line_search_direction_type = ceres::LBFGS;
  opts.max_num_iterations = options.max_iterations;
  opts.gradient_tolerance = options.gradient_tolerance;
  opts.function_tolerance = 1e-15;
  opts.parameter_tolerance = 1e-14;
  opts.logging_type = ceres::SILENT;
  opts.minimizer_progress_to_stdout = false;
  ceres::GradientProblem problem(new CeresObjective(prototype));
  ceres::GradientProblemSolver::Summary summary;
  try {
    ceres::Solve(opts, problem, u.data(), &summary);
  } catch (const std::exception& e) {
    out.message = e.what();
    return out;
  }
  out.iterations = static_cast<int>(summary.iterations.size());
  out.message = summary.message;
  PenalizedObjective check = prototype;
  try {
    std::vector<double> g;
    const auto v = check.evaluate(u, &g);
    out.objective = v.objective;
    out.gradient_norm = inf_norm(g);
    out.finite = std::isfinite(out.objective);
    out.converged = out.finite && out.gradient_norm <= options.gradient_tolerance;
  } catch (const std::exception& e) {
    out.message = e.what();
  }
  out.u = std::move(u);
  return out;
}

std::vector<double> random_start(const Parametrization& par, double sigma_p, std::uint64_t seed, int index) {
  auto rng = make_stream(seed, static_cast<std::uint64_t>(index));
  std::normal_distribution<double> z(0.0, 1.0);
  auto u = neutral_start(par);
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] += par.free_parameters()[i].group == Group::LogN ? z(rng) : sigma_p * z(rng);
  }
  return u;
}

Eigen::MatrixXd gradient_hessian(const PenalizedObjective& objective, const std::vector<double>& u, double step) {
  const std::size_t n = u.size();
  Eigen::MatrixXd H(n, n);
  std::vector<double> x = u, gp, gm;
  PenalizedObjective local = objective;
  for (std::size_t j = 0; j < n; ++j) {
    const double h = step * std::max(1.0, std::abs(u[j]));
    x[j] = u[j] + h;
    local.evaluate(x, &gp);
    x[j] = u[j] - h;
    local.evaluate(x, &gm);
    x[j] = u[j];
    for (std::size_t i = 0; i < n; ++i) H(i, j) = (gp[i] - gm[i]) / (2.0 * h);
  }
  return 0.5 * (H + H.transpose());
}

struct Polished {
  std::vector<double> u;
  double gradient_norm = std::numeric_limits<double>::infinity();
  int steps = 0;
};

/// Newton iterations on the analytic gradient with the finite-difference
/// Hessian. Near the optimum the objective changes by less than its rounding
/// level, so progress is judged by the gradient norm alone.
Polished newton_polish(const PenalizedObjective& objective, std::vector<double> u, const FitOptions& options) {
  PenalizedObjective local = objective;
  Polished out;
  std::vector<double> g;
  local.evaluate(u, &g);
  out.gradient_norm = inf_norm(g);
  for (int it = 0; it < 8 && out.gradient_norm > options.gradient_tolerance; ++it) {
    const Eigen::MatrixXd H = gradient_hessian(local, u, options.hessian_step);
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) break;
    const Eigen::VectorXd delta = -llt.solve(Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size())));
    bool accepted = false;
    double t = 1.0;
    for (int halving = 0; halving < 10 && !accepted; ++halving, t *= 0.5) {
      std::vector<double> trial = u;
      for (std::size_t i = 0; i < u.size(); ++i) trial[i] += t * delta(static_cast<Eigen::Index>(i));
      std::vector<double> gt;
      try {
        local.evaluate(trial, &gt);
      } catch (const EvaluationError&) {
        continue;
      }
      const double norm = inf_norm(gt);
      if (norm < out.gradient_norm) {
        u = std::move(trial);
        g = std::move(gt);
        out.gradient_norm = norm;
        accepted = true;
      }
    }
    if (!accepted) break;
    ++out.steps;
  }
  out.u = std::move(u);
  return out;
}

}  // namespace

const Estimate* FitResult::find(const std::string& name) const {
  for (const auto& e : reported) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

double aic(int nparams, double loglik) { return 2.0 * nparams - 2.0 * loglik; }

std::vector<double> neutral_start(const Parametrization& par) {
  std::vector<double> u(par.size(), 0.0);
  u[0] = std::log(std::max(1.0, par.marked_total()));
  return u;
}

std::shared_ptr<const LikelihoodEngine> make_engine(const ObservedData& data, const ModelSpec& model,
                                                    const EngineOptions& options) {
  Parametrization par(data.design(), model, data.marked_total());
  const auto reference = par.from_unconstrained(neutral_start(par));
  return std::make_shared<const LikelihoodEngine>(data, model.emigration.family, reference, options);
}

FitResult fit(const ObservedData& data, const ModelSpec& model, const FitOptions& options) {
  return fit(make_engine(data, model, options.engine), model, options);
}

FitResult fit(std::shared_ptr<const LikelihoodEngine> engine, const ModelSpec& model, const FitOptions& options) {
  if (options.restarts < 1) throw InputError("at least one optimizer start is required");
  if (!(options.sigma_p > 0.0)) throw InputError("sigma_p must be positive");
  if (engine->family() != model.emigration.family) throw InputError("likelihood engine uses a different family");
  Parametrization par(engine->design(), model, engine->data().marked_total());
  const PenalizedObjective prototype(engine, par, options.sigma_p, options.likelihood);

  std::vector<std::vector<double>> starts;
  starts.push_back(neutral_start(par));
  for (int r = 1; r < options.restarts; ++r) starts.push_back(random_start(par, options.sigma_p, options.seed, r));

  std::vector<StartOutcome> outcomes(starts.size());
  const int workers = std::max(1, std::min<int>(options.threads, static_cast<int>(starts.size())));
  if (workers == 1) {
    for (std::size_t r = 0; r < starts.size(); ++r) outcomes[r] = run_start(prototype, starts[r], options);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t r = static_cast<std::size_t>(w); r < starts.size(); r += static_cast<std::size_t>(workers)) {
          outcomes[r] = run_start(prototype, starts[r], options);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  // Candidates in order of their quasi-Newton objective; the best few are
  // polished until one meets the gradient criterion.
  std::vector<std::size_t> order;
  int settled = 0;
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    if (!outcomes[r].finite) continue;
    order.push_back(r);
    if (outcomes[r].gradient_norm <= 1e-3) ++settled;
  }
  if (order.empty()) {
    throw ConvergenceError(fmt::format("no optimizer start reached a finite objective for model {} ({})", model.name,
                                       outcomes.front().message));
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return outcomes[a].objective < outcomes[b].objective; });
  int best = -1;
  Polished win;
  for (std::size_t c = 0; c < std::min<std::size_t>(3, order.size()); ++c) {
    auto p = newton_polish(prototype, outcomes[order[c]].u, options);
    if (best < 0 || (p.gradient_norm <= options.gradient_tolerance && win.gradient_norm > options.gradient_tolerance)) {
      best = static_cast<int>(order[c]);
      win = std::move(p);
    }
    if (win.gradient_norm <= options.gradient_tolerance) break;
  }
  const auto& start = outcomes[static_cast<std::size_t>(best)];

  FitResult res;
  res.model = model;
  res.label = display_label(model);
  res.u = win.u;
  for (const auto& f : par.free_parameters()) res.parameter_names.push_back(f.name);
  res.estimates = par.from_unconstrained(win.u);
  PenalizedObjective final_eval = prototype;
  const auto v = final_eval.evaluate(win.u);
  res.loglik = v.loglik;
  res.penalty = v.penalty;
  res.penalized_objective = v.objective;
  res.nparams = static_cast<int>(par.size());
  res.aic = aic(res.nparams, res.loglik);
  res.convergence.converged = win.gradient_norm <= options.gradient_tolerance;
  res.convergence.gradient_norm = win.gradient_norm;
  res.convergence.iterations = start.iterations + win.steps;
  res.convergence.restart = best;
  res.convergence.starts = static_cast<int>(outcomes.size());
  res.convergence.starts_converged = settled;
  res.convergence.message = fmt::format("{}; {} Newton steps", start.message, win.steps);
  res.diagnostics = engine->diagnostics();

  const std::size_t n = par.size();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
  if (options.compute_intervals) {
    try {
      const Eigen::MatrixXd H = gradient_hessian(prototype, win.u, options.hessian_step);
      Eigen::LLT<Eigen::MatrixXd> llt(H);
      if (llt.info() == Eigen::Success) {
        cov = llt.solve(Eigen::MatrixXd::Identity(n, n));
        res.hessian_ok = cov.allFinite();
      }
    } catch (const std::exception& e) {
      res.diagnostics.push_back(fmt::format("Hessian evaluation failed: {}", e.what()));
    }
    if (!res.hessian_ok) res.diagnostics.push_back("Hessian of the penalized objective is not positive definite; intervals omitted");
  }
  res.se.assign(n, std::numeric_limits<double>::quiet_NaN());
  if (res.hessian_ok) {
    for (std::size_t i = 0; i < n; ++i) res.se[i] = std::sqrt(cov(i, i));
  }

  // Reported quantities and their Jacobian in one dual sweep per chunk.
  const auto& names = par.reported_names();
  const auto values = par.reported<double>(res.estimates);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(values.size()), n);
  for (std::size_t start = 0; start < n; start += kDualWidth) {
    const std::size_t width = std::min(kDualWidth, n - start);
    std::vector<GradDual> ud(win.u.begin(), win.u.end());
    for (std::size_t i = 0; i < width; ++i) ud[start + i] = GradDual::variable(win.u[start + i], i);
    const auto q = par.reported<GradDual>(par.from_unconstrained<GradDual>(std::span<const GradDual>(ud)));
    for (std::size_t r = 0; r < q.size(); ++r)
      for (std::size_t i = 0; i < width; ++i) J(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(start + i)) = q[r].d[i];
  }
  const double M = par.marked_total();
  for (std::size_t r = 0; r < values.size(); ++r) {
    Estimate e;
    e.name = names[r];
    e.value = values[r];
    e.lower = e.upper = e.value;
    if (res.hessian_ok) {
      const Eigen::RowVectorXd jr = J.row(static_cast<Eigen::Index>(r));
      e.se = std::sqrt(std::max(0.0, (jr * cov * jr.transpose())(0, 0)));
      if (r < Parametrization::kFirstProbability) {
        const double t = std::log(e.value - M);
        const double st = e.se / (e.value - M);
        e.lower = M + std::exp(t - kZ95 * st);
        e.upper = M + std::exp(t + kZ95 * st);
      } else {
        const double q = std::clamp(e.value, 1e-300, 1.0 - 1e-16);
        const double t = logit(q);
        const double st = e.se / (q * (1.0 - q));
        e.lower = expit(t - kZ95 * st);
        e.upper = expit(t + kZ95 * st);
      }
      e.interval = std::isfinite(e.lower) && std::isfinite(e.upper);
    } else {
      e.se = std::numeric_limits<double>::quiet_NaN();
    }
    res.reported.push_back(e);
  }
  return res;
}

}  // namespace lmte
