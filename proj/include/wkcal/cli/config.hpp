#pragma once

// Run configuration: JSON files plus `--set key=value` overrides, validated
// against the built-in defaults before anything runs.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wkcal/koh/pipeline.hpp"
#include "wkcal/nls_optim.hpp"
#include "wkcal/synthetic.hpp"

namespace wkcal::cli {

struct SetupConfig {
  int preset = 1;  // 1..4 selects a standard truth; 0 uses the fields below
  std::string model = "wk3";
  double R = 1.0;  // WK2 truth
  double R1 = 0.1;
  double R2 = 1.0;
  double C = 0.8;
  double noise_sd = 4.0;
  double resolution = 0.05;
  std::size_t n_cycles = 3;
};

struct InflowConfig {
  std::string profile = "half_sine";  // half_sine | constant
  double period = 0.85;
  double systole = 0.3;
  double mean_flow = 90.0;
};

struct BoundsConfig {
  std::vector<double> lower;
  std::vector<double> upper;
};

struct FitConfig {
  std::vector<std::string> models{"wk2", "wk3"};
  bool per_cycle = false;
  std::size_t n_starts = 8;
  BoundsConfig wk2_bounds;
  BoundsConfig wk3_bounds;
};

struct ReplicateConfig {
  std::vector<int> setups{1, 2, 3, 4};
  std::size_t n = 100;
  std::vector<std::string> models{"wk2", "wk3"};
};

struct CalibrateConfig {
  std::size_t design_size = 200;
  std::size_t n_influential = 12;
  std::string initial_guess = "wk2_fit";
  double R0 = 1.75;
  double C0 = 1.75;
  std::size_t chains = 4;
  std::size_t iterations = 30000;
  double burn_in_fraction = 0.5;
  std::size_t thin = 0;
  std::size_t target_draws = 7000;
  double prior_multiple = 5.0;
  double grid_step = 0.0;
  bool prior_only = false;
  bool mean_only = false;
};

struct RunConfig {
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string out_dir = "wkcal_out";
  std::string input;  // field CSV; empty means simulate from `setup`
  SetupConfig setup;
  InflowConfig inflow;
  FitConfig fit;
  ReplicateConfig replicate;
  CalibrateConfig calibrate;
};

nlohmann::json to_json(const RunConfig& config);

/// Overlays `overrides` on the defaults. Unknown keys, type mismatches and out
/// of range values raise ConfigError naming the dotted key.
RunConfig parse_config(const nlohmann::json& overrides);

/// Applies "a.b.c=value" to a JSON document. The value is read as JSON when it
/// parses, otherwise as a string.
void apply_set(nlohmann::json& doc, std::string_view assignment);

/// Reads an optional JSON file, applies the assignments in order, then parses.
RunConfig load_config(const std::optional<std::string>& path, const std::vector<std::string>& assignments);

/// Checks ranges and enumerations; throws ConfigError.
void validate(const RunConfig& config);

/// 16 hex digits of FNV-1a over the canonical JSON of every setting that can
/// change results (out_dir and threads are left out).
std::string config_hash(const RunConfig& config);

SetupSpec make_setup(const RunConfig& config);
SetupSpec make_setup(const RunConfig& config, int preset);
InflowWaveform make_inflow(const InflowConfig& inflow);
FitOptions make_fit_options(const RunConfig& config, ModelKind model);
koh::CalibrationConfig make_calibration_config(const RunConfig& config);
std::vector<ModelKind> parse_models(const std::vector<std::string>& names);

}  // namespace wkcal::cli
