#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "app.hpp"

namespace lmte::app {

namespace {

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string csv_number(double v) { return std::isfinite(v) ? format_number(v) : std::string(); }

std::vector<std::size_t> aic_order(const std::vector<FitResult>& fits) {
  std::vector<std::size_t> order(fits.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fits[a].aic < fits[b].aic; });
  return order;
}

}  // namespace

std::string format_number(double v) { return fmt::format("{:.10g}", v); }

Json fit_report(const FitResult& r) {
  Json j;
  j["model"] = model_to_json(r.model);
  j["label"] = r.label;
  j["loglik"] = r.loglik;
  j["penalty"] = r.penalty;
  j["penalized_objective"] = r.penalized_objective;
  j["nparams"] = r.nparams;
  j["aic"] = r.aic;
  j["hessian_ok"] = r.hessian_ok;
  j["convergence"] = Json{{"converged", r.convergence.converged},
                          {"gradient_norm", r.convergence.gradient_norm},
                          {"iterations", r.convergence.iterations},
                          {"restart", r.convergence.restart},
                          {"starts", r.convergence.starts},
                          {"starts_converged", r.convergence.starts_converged},
                          {"message", r.convergence.message}};
  Json est = Json::array();
  for (const auto& e : r.reported) {
    est.push_back(Json{{"name", e.name},
                       {"estimate", e.value},
                       {"se", number_or_null(e.se)},
                       {"lower", e.interval ? Json(e.lower) : Json(nullptr)},
                       {"upper", e.interval ? Json(e.upper) : Json(nullptr)}});
  }
  j["estimates"] = est;
  Json un = Json::array();
  for (std::size_t i = 0; i < r.u.size(); ++i) {
    un.push_back(Json{{"name", r.parameter_names[i]}, {"value", r.u[i]}, {"se", number_or_null(r.se[i])}});
  }
  j["unconstrained"] = un;
  j["diagnostics"] = r.diagnostics;
  return j;
}

Json comparison_report(const std::vector<FitResult>& fits) {
  Json rows = Json::array();
  const auto order = aic_order(fits);
  const double best = fits.empty() ? 0.0 : fits[order.front()].aic;
  for (std::size_t i : order) {
    const auto& r = fits[i];
    const auto* N = r.find("N");
    rows.push_back(Json{{"model", r.model.name},
                        {"label", r.label},
                        {"nparams", r.nparams},
                        {"loglik", r.loglik},
                        {"aic", r.aic},
                        {"delta_aic", r.aic - best},
                        {"N", N ? Json(N->value) : Json(nullptr)},
                        {"N_lower", N && N->interval ? Json(N->lower) : Json(nullptr)},
                        {"N_upper", N && N->interval ? Json(N->upper) : Json(nullptr)},
                        {"converged", r.convergence.converged}});
  }
  return rows;
}

std::string comparison_csv(const std::vector<FitResult>& fits) {
  std::string out = "model,label,nparams,loglik,aic,delta_aic,N,N_lower,N_upper,converged\n";
  const auto order = aic_order(fits);
  const double best = fits.empty() ? 0.0 : fits[order.front()].aic;
  for (std::size_t i : order) {
    const auto& r = fits[i];
    const auto* N = r.find("N");
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r.model.name, r.label, r.nparams, format_number(r.loglik),
                       format_number(r.aic), format_number(r.aic - best), N ? csv_number(N->value) : "",
                       N && N->interval ? csv_number(N->lower) : "", N && N->interval ? csv_number(N->upper) : "",
                       r.convergence.converged ? 1 : 0);
  }
  return out;
}

std::string estimates_csv(const std::vector<FitResult>& fits) {
  std::string out = "model,parameter,estimate,se,lower,upper\n";
  for (const auto& r : fits) {
    for (const auto& e : r.reported) {
      out += fmt::format("{},\"{}\",{},{},{},{}\n", r.model.name, e.name, format_number(e.value), csv_number(e.se),
                         e.interval ? csv_number(e.lower) : "", e.interval ? csv_number(e.upper) : "");
    }
  }
  return out;
}

Json study_report(const StudySummary& s, const StudyConfig& c) {
  Json j;
  j["config"] = study_config_to_json(c);
  Json models = Json::array();
  for (const auto& m : s.models) {
    Json rows = Json::array();
    for (const auto& p : m.parameters) {
      rows.push_back(Json{{"parameter", p.name},
                          {"truth", number_or_null(p.truth)},
                          {"mean", p.mean},
                          {"cic", number_or_null(p.cic)},
                          {"ciw", number_or_null(p.ciw)},
                          {"estimates", p.estimates},
                          {"intervals", p.intervals}});
    }
    models.push_back(Json{{"model", m.model}, {"label", m.label}, {"used", m.used}, {"excluded", m.excluded},
                          {"parameters", rows}});
  }
  j["models"] = models;
  Json reps = Json::array();
  for (const auto& f : s.fits) {
    reps.push_back(Json{{"replicate", f.replicate},
                        {"model", f.model},
                        {"converged", f.converged},
                        {"failed", f.failed},
                        {"message", f.message}});
  }
  j["replicates"] = reps;
  j["marked_totals"] = s.marked_totals;
  return j;
}

std::string study_summary_csv(const StudySummary& s) {
  std::string out = "model,parameter,truth,mean,cic,ciw,estimates,intervals,used,excluded\n";
  for (const auto& m : s.models) {
    for (const auto& p : m.parameters) {
      out += fmt::format("{},\"{}\",{},{},{},{},{},{},{},{}\n", m.model, p.name, csv_number(p.truth), format_number(p.mean),
                         csv_number(p.cic), csv_number(p.ciw), p.estimates, p.intervals, m.used, m.excluded);
    }
  }
  return out;
}

std::string study_replicates_csv(const StudySummary& s) {
  std::string out = "replicate,model,converged,failed,parameter,estimate,lower,upper\n";
  for (const auto& f : s.fits) {
    if (f.failed) {
      out += fmt::format("{},{},0,1,,,,\n", f.replicate, f.model);
      continue;
    }
    for (const auto& e : f.estimates) {
      out += fmt::format("{},{},{},0,\"{}\",{},{},{}\n", f.replicate, f.model, f.converged ? 1 : 0, e.name,
                         format_number(e.value), e.interval ? csv_number(e.lower) : "",
                         e.interval ? csv_number(e.upper) : "");
    }
  }
  return out;
}

}  // namespace lmte::app
