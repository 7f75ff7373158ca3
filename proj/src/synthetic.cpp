#include "wkcal/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "wkcal/errors.hpp"
#include "wkcal/numerics/parallel.hpp"
#include "wkcal/numerics/rng.hpp"
#include "wkcal/numerics/stats.hpp"

namespace wkcal {

namespace {

constexpr double kGridSlack = 1e-9;
constexpr double kMaxDurationRatio = 1.2;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return numerics::quantile_sorted(v, 0.5);
}

}  // namespace

SetupSpec standard_setup(int index, std::uint64_t seed) {
  SetupSpec s;
  s.seed = seed;
  switch (index) {
    case 1:
      s.truth = Wk3Params{0.1, 1.0, 0.8};
      break;
    case 2:
      s.truth = Wk3Params{0.05, 0.9, 0.8};
      break;
    case 3:
      s.truth = Wk3Params{0.1, 1.0, 0.9};
      break;
    case 4:
      s.truth = Wk3Params{0.02, 1.4, 1.3};
      break;
    default:
      throw std::invalid_argument("standard setups are numbered 1 to 4");
  }
  s.name = "setup" + std::to_string(index);
  return s;
}

void validate(const SetupSpec& setup) {
  if (!(setup.noise_sd >= 0.0) || !std::isfinite(setup.noise_sd)) {
    throw std::invalid_argument("noise_sd must be finite and >= 0");
  }
  if (!(setup.resolution > 0.0) || !std::isfinite(setup.resolution)) {
    throw std::invalid_argument("resolution must be positive");
  }
  if (setup.n_cycles < 1) throw std::invalid_argument("n_cycles must be >= 1");
  std::visit([](const auto& p) { validate(p); }, setup.truth);
}

std::vector<int> FieldData::cycle_ids() const {
  std::set<int> ids;
  for (const auto& o : observations) ids.insert(o.cycle_id);
  return {ids.begin(), ids.end()};
}

bool FieldData::has_pressure() const {
  return !observations.empty() &&
         std::all_of(observations.begin(), observations.end(),
                     [](const Observation& o) { return std::isfinite(o.pressure); });
}

FieldData FieldData::cycle(int id) const {
  FieldData out;
  out.provenance = provenance;
  for (const auto& o : observations) {
    if (o.cycle_id == id) out.observations.push_back(o);
  }
  if (out.observations.empty()) throw std::invalid_argument("no observations in cycle " + std::to_string(id));
  out.cycle_starts[id] = cycle_starts.at(id);
  return out;
}

void validate(const FieldData& data) {
  if (data.observations.empty()) throw DataError("field data has no observations");
  std::map<int, std::vector<const Observation*>> by_cycle;
  for (const auto& o : data.observations) {
    if (!std::isfinite(o.time) || !std::isfinite(o.flow)) {
      throw DataError("non-finite time or flow in cycle " + std::to_string(o.cycle_id));
    }
    by_cycle[o.cycle_id].push_back(&o);
  }
  for (const auto& [id, obs] : by_cycle) {
    const std::string label = "cycle " + std::to_string(id);
    if (obs.size() < 5) {
      throw DataError(label + " has " + std::to_string(obs.size()) +
                      " observations; at least 5 are required");
    }
    for (std::size_t i = 1; i < obs.size(); ++i) {
      if (!(obs[i]->time > obs[i - 1]->time)) {
        throw DataError(label + ": times are not strictly increasing");
      }
    }
    const auto start = data.cycle_starts.find(id);
    if (start == data.cycle_starts.end()) throw DataError(label + " has no start time");
    if (obs.front()->time < start->second - kGridSlack) {
      throw DataError(label + " has observations before its start");
    }
  }
}

FieldData noiseless_dataset(const SetupSpec& setup) {
  validate(setup);
  const double period = setup.inflow.period();
  const double span = static_cast<double>(setup.n_cycles) * period;
  std::vector<double> grid;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * setup.resolution;
    if (t >= span - kGridSlack) break;
    grid.push_back(t);
  }

  const auto series = simulate(setup.inflow, setup.truth, grid, setup.solver);

  FieldData out;
  out.provenance = setup;
  out.observations.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const int cycle = static_cast<int>(std::floor(grid[i] / period + kGridSlack));
    out.observations.push_back({grid[i], setup.inflow.at(grid[i]).flow, series.values[i], cycle});
  }
  for (std::size_t c = 0; c < setup.n_cycles; ++c) {
    out.cycle_starts[static_cast<int>(c)] = static_cast<double>(c) * period;
  }
  return out;
}

namespace {

void add_noise(FieldData& data, std::uint64_t seed, double sd) {
  if (sd == 0.0) return;
  int current = std::numeric_limits<int>::min();
  std::uint64_t index = 0;
  std::uint64_t key = 0;
  for (auto& o : data.observations) {
    if (o.cycle_id != current) {
      current = o.cycle_id;
      index = 0;
      key = numerics::derive_key(seed, static_cast<std::uint64_t>(o.cycle_id));
    }
    o.pressure += sd * numerics::keyed_normal(key, index++);
  }
}

}  // namespace

FieldData generate_dataset(const SetupSpec& setup) {
  FieldData data = noiseless_dataset(setup);
  add_noise(data, setup.seed, setup.noise_sd);
  return data;
}

std::vector<FieldData> replicate_datasets(const SetupSpec& setup, std::size_t n) {
  if (n < 1) throw std::invalid_argument("replicate count must be >= 1");
  const FieldData backbone = noiseless_dataset(setup);
  std::vector<FieldData> out(n, backbone);
  numerics::parallel_for(n, [&](std::size_t r) {
    SetupSpec s = setup;
    s.seed = setup.seed + r;
    out[r].provenance = s;
    add_noise(out[r], s.seed, s.noise_sd);
  });
  return out;
}

std::map<int, double> cycle_durations(const FieldData& data) {
  std::map<int, std::vector<double>> times;
  for (const auto& o : data.observations) times[o.cycle_id].push_back(o.time);
  std::map<int, double> out;
  for (const auto& [id, t] : times) {
    const double start = data.cycle_starts.at(id);
    std::vector<double> gaps;
    for (std::size_t i = 1; i < t.size(); ++i) gaps.push_back(t[i] - t[i - 1]);
    const double spacing = gaps.empty() ? 0.0 : median(gaps);
    out[id] = t.back() - start + spacing;
  }
  return out;
}

FieldData synchronize_cycles(const FieldData& data) {
  validate(data);
  const auto durations = cycle_durations(data);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& [id, d] : durations) {
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  if (!(hi < kMaxDurationRatio * lo)) {
    throw SynchronizationError("cycle durations range from " + std::to_string(lo) + " s to " +
                               std::to_string(hi) + " s; ratio must stay below 1.2");
  }
  FieldData out = data;
  for (auto& o : out.observations) o.time = std::max(0.0, o.time - data.cycle_starts.at(o.cycle_id));
  for (auto& [id, start] : out.cycle_starts) start = 0.0;
  return out;
}

FieldData assign_cycles(const std::vector<Observation>& raw, RecordedSource source,
                        double threshold_fraction) {
  if (raw.size() < 2) throw DataError("recording too short to detect cycles");
  double peak = 0.0;
  for (const auto& o : raw) peak = std::max(peak, o.flow);
  if (!(peak > 0.0)) throw DataError("recording has no positive flow; cannot detect cycles");
  const double level = threshold_fraction * peak;

  std::vector<std::size_t> starts;
  for (std::size_t i = 1; i < raw.size(); ++i) {
    if (raw[i - 1].flow < level && raw[i].flow >= level) starts.push_back(i - 1);
  }
  if (raw.front().flow >= level) starts.insert(starts.begin(), 0);
  if (starts.empty()) throw DataError("no flow upcrossings found; cannot detect cycles");

  FieldData out;
  out.provenance = std::move(source);
  for (std::size_t c = 0; c < starts.size(); ++c) {
    const std::size_t end = c + 1 < starts.size() ? starts[c + 1] : raw.size();
    const int id = static_cast<int>(c);
    out.cycle_starts[id] = raw[starts[c]].time;
    for (std::size_t i = starts[c]; i < end; ++i) {
      Observation o = raw[i];
      o.cycle_id = id;
      out.observations.push_back(o);
    }
  }
  return out;
}

InflowWaveform inflow_from_data(const FieldData& data, double threshold_fraction) {
  const FieldData synced = synchronize_cycles(data);
  std::vector<double> durations;
  for (const auto& [id, d] : cycle_durations(synced)) durations.push_back(d);
  const double period = median(durations);

  std::vector<std::pair<double, double>> pooled;
  for (const auto& o : synced.observations) {
    if (o.time < period) pooled.emplace_back(o.time, o.flow);
  }
  std::sort(pooled.begin(), pooled.end());
  std::vector<FlowSample> merged;
  std::vector<int> counts;
  for (const auto& [t, q] : pooled) {
    if (!merged.empty() && t - merged.back().time < 1e-9) {
      merged.back().flow += q;
      ++counts.back();
    } else {
      merged.push_back({t, q});
      counts.push_back(1);
    }
  }
  for (std::size_t i = 0; i < merged.size(); ++i) merged[i].flow /= counts[i];

  const auto peak = std::max_element(merged.begin(), merged.end(),
                                     [](const FlowSample& a, const FlowSample& b) { return a.flow < b.flow; });
  if (peak == merged.end() || !(peak->flow > 0.0)) throw DataError("recording has no positive flow");
  const double level = threshold_fraction * peak->flow;
  auto end = std::find_if(peak, merged.end(), [&](const FlowSample& s) { return s.flow <= level; });
  if (end == merged.end()) throw DataError("flow never returns below threshold; systole end not found");
  return InflowWaveform::table(period, end->time, std::move(merged));
}

}  // namespace wkcal
