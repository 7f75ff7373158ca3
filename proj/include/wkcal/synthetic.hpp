#pragma once

// Synthetic field data from a known Windkessel truth, and cycle bookkeeping for
// recorded (time, flow, pressure) series.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "wkcal/wk_models.hpp"

namespace wkcal {

struct SetupSpec {
  std::string name = "custom";
  WkParams truth = Wk3Params{0.1, 1.0, 0.8};
  double noise_sd = 4.0;     // mmHg
  double resolution = 0.05;  // s
  std::size_t n_cycles = 3;
  std::uint64_t seed = 1;
  InflowWaveform inflow = InflowWaveform::half_sine();
  SolverOptions solver{};
};

/// The four WK3 ground truths used throughout the synthetic study, index 1..4.
SetupSpec standard_setup(int index, std::uint64_t seed = 1);

void validate(const SetupSpec& setup);

struct Observation {
  double time;      // s
  double flow;      // ml/s
  double pressure;  // mmHg; NaN when the recording carries flow only
  int cycle_id;
};

struct RecordedSource {
  std::string path;
};

struct FieldData {
  std::vector<Observation> observations;
  /// Absolute start time of every cycle present in `observations`.
  std::map<int, double> cycle_starts;
  std::variant<RecordedSource, SetupSpec> provenance;

  std::size_t size() const noexcept { return observations.size(); }
  std::vector<int> cycle_ids() const;
  bool has_pressure() const;
  /// Observations of one cycle, same provenance, with that cycle's start kept.
  FieldData cycle(int id) const;
};

/// Checks the FieldData contract: finite times and flows, strictly increasing
/// times within each cycle, at least five observations per cycle, a start for
/// every cycle. Throws DataError naming the offending cycle.
void validate(const FieldData& data);

/// Noiseless steady-state truth sampled on the setup's grid.
FieldData noiseless_dataset(const SetupSpec& setup);

/// noiseless_dataset plus N(0, noise_sd^2) noise keyed by (seed, cycle, index in cycle).
FieldData generate_dataset(const SetupSpec& setup);

/// Datasets for seeds seed, seed + 1, ..., seed + n - 1 sharing one noiseless backbone.
std::vector<FieldData> replicate_datasets(const SetupSpec& setup, std::size_t n);

/// Rebases every cycle to start at time 0. Throws SynchronizationError when the
/// longest and shortest cycle durations differ by a factor of 1.2 or more.
FieldData synchronize_cycles(const FieldData& data);

/// Cycle duration estimate: last time minus start plus the median sample spacing.
std::map<int, double> cycle_durations(const FieldData& data);

/// Splits a raw recording into cycles. A cycle begins at the last sample below
/// `threshold_fraction` of peak flow before each upcrossing of that level.
/// Samples before the first detected start are dropped.
FieldData assign_cycles(const std::vector<Observation>& raw, RecordedSource source,
                        double threshold_fraction = 0.05);

/// Table-mode inflow reconstructed from a recording's synchronized flow samples.
/// Samples at equal phase (to 1e-9 s) across cycles are averaged; systole ends at
/// the first sample after peak flow at or below `threshold_fraction` of the peak.
InflowWaveform inflow_from_data(const FieldData& data, double threshold_fraction = 0.05);

}  // namespace wkcal
