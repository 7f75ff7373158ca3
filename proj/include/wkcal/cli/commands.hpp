#pragma once

// Subcommand bodies. Each writes its files under config.out_dir and returns the
// JSON report it wrote. Progress and wall-clock timings go to `log` only, so
// the files depend on nothing but the configuration.

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "wkcal/cli/config.hpp"

namespace wkcal::cli {

inline constexpr int kSchemaVersion = 1;

/// field.csv, reference.csv (noiseless), simulate.json.
nlohmann::json cmd_simulate(const RunConfig& config, std::ostream& log);

/// fit.json and fit_table.csv.
nlohmann::json cmd_fit(const RunConfig& config, std::ostream& log);

/// replicate_study.json and replicate_study.csv (setup x model x parameter).
nlohmann::json cmd_replicate_study(const RunConfig& config, std::ostream& log);

/// posterior_samples.csv, band_{bias_corrected,pure_model,bias}.csv, calibration.json.
nlohmann::json cmd_calibrate(const RunConfig& config, std::ostream& log);

struct ReportOptions {
  std::vector<std::string> inputs;  // JSON reports; empty means every known report in out_dir
  bool strict = false;              // config hash mismatch is an error rather than a flag
};

/// Collects existing reports into summary_table.csv and report.md.
nlohmann::json cmd_report(const RunConfig& config, const ReportOptions& options, std::ostream& log);

}  // namespace wkcal::cli
