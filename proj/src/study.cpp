#include "lmte/study.hpp"

#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "lmte/simulate.hpp"

namespace lmte {

void validate(const StudyConfig& config) {
  if (config.replicates < 1) throw InputError("a study needs at least one replicate");
  if (config.models.empty()) throw InputError("a study needs at least one model to fit");
  if (config.threads < 1) throw InputError("threads must be at least 1");
  check_shape(config.truth, config.design, config.family);
  if (config.truth.N < 1.0 || std::floor(config.truth.N) != config.truth.N) {
    throw InputError(fmt::format("simulation N = {} must be a positive integer", config.truth.N));
  }
}

ObservedLayout study_layout(const StudyConfig& config) {
  return config.scenario == Scenario::ID ? ObservedLayout::individual(config.design)
                                         : ObservedLayout::batch(config.design, config.aggregation);
}

SimulatedDataset simulate_replicate(const StudyConfig& config, int index) {
  auto rng = make_stream(config.seed, static_cast<std::uint64_t>(index));
  return simulate_dataset(static_cast<std::int64_t>(config.truth.N), config.truth, config.family, config.design,
                          study_layout(config), rng);
}

const ParameterSummary* ModelSummary::find(const std::string& name) const {
  for (const auto& p : parameters) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const ModelSummary* StudySummary::find(const std::string& model) const {
  for (const auto& m : models) {
    if (m.model == model) return &m;
  }
  return nullptr;
}

ModelSummary summarize(const ModelSpec& model, const std::vector<ReplicateFit>& fits,
                       const std::vector<NamedValue>& truth) {
  ModelSummary out;
  out.model = model.name;
  out.label = display_label(model);
  std::vector<const ReplicateFit*> used;
  for (const auto& f : fits) {
    if (f.model != model.name) continue;
    if (f.converged && !f.failed) {
      used.push_back(&f);
    } else {
      ++out.excluded;
    }
  }
  out.used = static_cast<int>(used.size());
  if (used.empty()) return out;
  for (std::size_t i = 0; i < used.front()->estimates.size(); ++i) {
    ParameterSummary s;
    s.name = used.front()->estimates[i].name;
    s.truth = std::numeric_limits<double>::quiet_NaN();
    for (const auto& t : truth) {
      if (t.name == s.name) s.truth = t.value;
    }
    double sum = 0.0, width = 0.0;
    int covered = 0;
    for (const auto* f : used) {
      const auto& e = f->estimates.at(i);
      sum += e.value;
      ++s.estimates;
      if (!e.interval) continue;
      ++s.intervals;
      width += e.upper - e.lower;
      if (e.lower <= s.truth && s.truth <= e.upper) ++covered;
    }
    s.mean = sum / s.estimates;
    s.ciw = s.intervals > 0 ? width / s.intervals : std::numeric_limits<double>::quiet_NaN();
    s.cic = s.intervals > 0 ? 100.0 * covered / s.intervals : std::numeric_limits<double>::quiet_NaN();
    out.parameters.push_back(s);
  }
  return out;
}

StudySummary run_study(const StudyConfig& config, const StudyProgress& progress) {
  validate(config);
  const std::size_t R = static_cast<std::size_t>(config.replicates);
  const std::size_t nm = config.models.size();
  StudySummary summary;
  summary.replicates = config.replicates;
  summary.seed = config.seed;
  summary.fits.resize(R * nm);
  summary.marked_totals.assign(R, 0);

  std::mutex report;
  auto run_replicate = [&](std::size_t r) {
    const auto ds = simulate_replicate(config, static_cast<int>(r));
    summary.marked_totals[r] = static_cast<std::int64_t>(ds.data.marked_total());
    for (std::size_t m = 0; m < nm; ++m) {
      const auto& model = config.models[m];
      ReplicateFit rf;
      rf.replicate = static_cast<int>(r);
      rf.model = model.name;
      FitOptions opts = config.fit;
      opts.seed = derive_seed(derive_seed(config.seed, r), m + 1);
      if (config.threads > 1) opts.threads = 1;
      try {
        const auto res = fit(ds.data, model, opts);
        rf.converged = res.convergence.converged;
        rf.message = res.convergence.message;
        rf.loglik = res.loglik;
        rf.aic = res.aic;
        rf.nparams = res.nparams;
        rf.estimates = res.reported;
      } catch (const std::exception& e) {
        rf.failed = true;
        rf.message = e.what();
      }
      if (progress) {
        std::lock_guard<std::mutex> lock(report);
        progress(rf);
      }
      summary.fits[r * nm + m] = std::move(rf);
    }
  };

  const int workers = std::max(1, std::min<int>(config.threads, config.replicates));
  if (workers == 1) {
    for (std::size_t r = 0; r < R; ++r) run_replicate(r);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t r = static_cast<std::size_t>(w); r < R; r += static_cast<std::size_t>(workers)) run_replicate(r);
      });
    }
    for (auto& t : pool) t.join();
  }

  const auto truth = Parametrization::truth_quantities(config.truth, config.design, config.family);
  for (const auto& model : config.models) summary.models.push_back(summarize(model, summary.fits, truth));
  return summary;
}

}  // namespace lmte
