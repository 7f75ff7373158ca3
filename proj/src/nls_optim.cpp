#include "wkcal/nls_optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "wkcal/errors.hpp"
#include "wkcal/numerics/parallel.hpp"
#include "wkcal/numerics/sampling.hpp"
#include "wkcal/numerics/stats.hpp"

namespace wkcal {

namespace {

constexpr double kPhaseMerge = 1e-9;

struct Folded {
  std::vector<double> phases;
  std::vector<std::size_t> index;
};

// Maps each observation to a unique cycle phase in [0, period).
Folded fold_phases(const FieldData& data, double period) {
  std::vector<double> raw;
  raw.reserve(data.size());
  for (const auto& o : data.observations) {
    const auto start = data.cycle_starts.find(o.cycle_id);
    if (start == data.cycle_starts.end()) {
      throw DataError("cycle " + std::to_string(o.cycle_id) + " has no start time");
    }
    double phase = std::fmod(o.time - start->second, period);
    if (phase < 0.0) phase += period;
    if (phase > period - kPhaseMerge) phase = 0.0;
    raw.push_back(std::max(0.0, phase));
  }

  Folded f;
  std::vector<double> sorted(raw);
  std::sort(sorted.begin(), sorted.end());
  for (double p : sorted) {
    if (f.phases.empty() || p - f.phases.back() > kPhaseMerge) f.phases.push_back(p);
  }
  f.index.reserve(raw.size());
  for (double p : raw) {
    auto it = std::lower_bound(f.phases.begin(), f.phases.end(), p - kPhaseMerge);
    f.index.push_back(static_cast<std::size_t>(it - f.phases.begin()));
  }
  return f;
}

std::vector<double> observed_pressure(const FieldData& data) {
  std::vector<double> y;
  y.reserve(data.size());
  for (const auto& o : data.observations) {
    if (!std::isfinite(o.pressure)) throw DataError("least-squares fitting needs pressure at every observation");
    y.push_back(o.pressure);
  }
  return y;
}

}  // namespace

std::vector<double> to_vector(const WkParams& params) {
  if (const auto* p2 = std::get_if<Wk2Params>(&params)) return {p2->R, p2->C};
  const auto& p3 = std::get<Wk3Params>(params);
  return {p3.R1, p3.R2, p3.C};
}

WkParams from_vector(ModelKind kind, std::span<const double> x) {
  if (kind == ModelKind::wk2) {
    if (x.size() != 2) throw std::invalid_argument("WK2 parameter vector has 2 entries");
    return Wk2Params{x[0], x[1]};
  }
  if (x.size() != 3) throw std::invalid_argument("WK3 parameter vector has 3 entries");
  return Wk3Params{x[0], x[1], x[2]};
}

std::vector<std::string> parameter_names(ModelKind kind) {
  if (kind == ModelKind::wk2) return {"R", "C"};
  return {"R1", "R2", "C"};
}

numerics::BoxBounds default_bounds(ModelKind kind) {
  if (kind == ModelKind::wk2) return {{0.5, 0.5}, {3.0, 3.0}};
  return {{0.0, 0.5, 0.5}, {0.5, 3.0, 3.0}};
}

RssObjective::RssObjective(ModelKind kind, const FieldData& data, const InflowWaveform& inflow,
                           const SolverOptions& solver)
    : kind_(kind),
      solver_([&] {
        if (data.observations.empty()) throw DataError("cannot fit an empty dataset");
        return PeriodicSolver(inflow, fold_phases(data, inflow.period()).phases, solver);
      }()),
      phase_index_(fold_phases(data, inflow.period()).index),
      observed_(observed_pressure(data)) {}

double RssObjective::operator()(const WkParams& params) const {
  if (kind_of(params) != kind_) throw std::invalid_argument("parameter set does not match the model");
  const auto cycle = solver_.solve(params);
  double s = 0.0;
  for (std::size_t i = 0; i < observed_.size(); ++i) {
    const double r = cycle.values[phase_index_[i]] - observed_[i];
    s += r * r;
  }
  return s;
}

double RssObjective::operator()(std::span<const double> x) const {
  return (*this)(from_vector(kind_, x));
}

double rss(const WkParams& params, const FieldData& data, const InflowWaveform& inflow,
           const SolverOptions& solver) {
  return RssObjective(kind_of(params), data, inflow, solver)(params);
}

FitResult fit(ModelKind kind, const FieldData& data, const InflowWaveform& inflow,
              const FitOptions& options) {
  if (options.n_starts < 1) throw std::invalid_argument("n_starts must be >= 1");
  const numerics::BoxBounds box = options.bounds.value_or(default_bounds(kind));
  const std::size_t dims = parameter_names(kind).size();
  if (box.size() != dims || box.upper.size() != dims) throw std::invalid_argument("bounds dimension mismatch");
  for (std::size_t j = 0; j < dims; ++j) {
    if (!(box.lower[j] <= box.upper[j])) throw std::invalid_argument("bounds must satisfy lower <= upper");
  }

  const RssObjective objective(kind, data, inflow, options.solver);
  const auto design = numerics::latin_hypercube(options.n_starts, dims, options.seed);

  std::vector<double> steps(dims);
  for (std::size_t j = 0; j < dims; ++j) steps[j] = 0.1 * (box.upper[j] - box.lower[j]);

  std::vector<StartDiagnostic> starts(options.n_starts);
  // Starts are independent; reductions below go by index, so scheduling cannot change the result.
  numerics::parallel_for(options.n_starts, [&](std::size_t s) {
    auto& d = starts[s];
    d.start.resize(dims);
    for (std::size_t j = 0; j < dims; ++j) {
      d.start[j] = box.lower[j] + design(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) *
                                      (box.upper[j] - box.lower[j]);
    }
    try {
      d.start_rss = objective(std::span<const double>(d.start));
      const auto r = numerics::nelder_mead(
          [&](std::span<const double> x) { return objective(x); }, d.start, steps, box, options.optimizer);
      d.terminal = r.x;
      d.rss = r.value;
      d.converged = r.converged;
      if (!std::isfinite(d.rss)) d.error = "non-finite RSS at terminal point";
    } catch (const std::exception& e) {
      d.error = e.what();
    }
  });

  FitResult result;
  result.n_starts = options.n_starts;
  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    if (!starts[s].error.empty()) continue;
    if (!any || starts[s].rss < best) {
      best = starts[s].rss;
      result.best_start_index = s;
      any = true;
    }
  }
  if (!any) {
    std::ostringstream msg;
    msg << "all " << starts.size() << " starts failed:";
    for (std::size_t s = 0; s < starts.size(); ++s) msg << " [" << s << "] " << starts[s].error << ";";
    throw OptimizationError(msg.str());
  }
  const auto& winner = starts[result.best_start_index];
  result.params = from_vector(kind, winner.terminal);
  result.rss = winner.rss;
  result.converged = winner.converged;
  result.starts = std::move(starts);
  return result;
}

std::vector<FitResult> fit_per_cycle(ModelKind kind, const FieldData& data,
                                     const InflowWaveform& inflow, const FitOptions& options) {
  std::vector<FitResult> out;
  for (int id : data.cycle_ids()) out.push_back(fit(kind, data.cycle(id), inflow, options));
  return out;
}

const ParameterSummary& ReplicateSummary::at(const std::string& name) const {
  for (const auto& p : parameters) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("no summary for parameter " + name);
}

ReplicateSummary replicate_study(const SetupSpec& setup, ModelKind model, std::size_t n,
                                 const FitOptions& options) {
  if (n < 1) throw std::invalid_argument("replicate study needs at least one replicate");
  const auto datasets = replicate_datasets(setup, n);

  std::vector<std::optional<WkParams>> fits(n);
  std::vector<std::string> errors(n);
  numerics::parallel_for(n, [&](std::size_t r) {
    try {
      fits[r] = fit(model, datasets[r], setup.inflow, options).params;
    } catch (const Error& e) {
      errors[r] = e.what();
    }
  });

  ReplicateSummary summary;
  summary.model = model;
  summary.n_replicates = n;
  for (const auto& f : fits) {
    if (f) summary.estimates.push_back(*f);
    else ++summary.n_failed;
  }
  if (static_cast<double>(summary.n_failed) > 0.1 * static_cast<double>(n)) {
    throw OptimizationError(std::to_string(summary.n_failed) + " of " + std::to_string(n) +
                            " replicate fits failed");
  }

  auto column = [&](auto&& get) {
    std::vector<double> v;
    for (const auto& p : summary.estimates) v.push_back(get(p));
    return v;
  };
  auto add = [&](const std::string& name, std::vector<double> values) {
    std::sort(values.begin(), values.end());
    summary.parameters.push_back({name, numerics::mean(values), numerics::quantile_sorted(values, 0.05),
                                  numerics::quantile_sorted(values, 0.95)});
  };
  add("C", column([](const WkParams& p) { return compliance(p); }));
  add("R", column([](const WkParams& p) { return total_resistance(p); }));
  if (model == ModelKind::wk3) {
    add("R1", column([](const WkParams& p) { return std::get<Wk3Params>(p).R1; }));
    add("R2", column([](const WkParams& p) { return std::get<Wk3Params>(p).R2; }));
  }
  return summary;
}

}  // namespace wkcal
