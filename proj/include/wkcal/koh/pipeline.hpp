#pragma once

// End-to-end two-stage calibration: emulator, bias initialization, sampling,
// summaries, and predictive bands.

#include <cstdint>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

#include "wkcal/koh/bias.hpp"
#include "wkcal/koh/emulator.hpp"
#include "wkcal/koh/field.hpp"
#include "wkcal/koh/mcmc.hpp"
#include "wkcal/koh/products.hpp"
#include "wkcal/koh/summary.hpp"
#include "wkcal/synthetic.hpp"

namespace wkcal::koh {

/// Where the stage-2 residuals are taken.
enum class InitialGuess {
  wk2_fit,     // least-squares WK2 fit to the field data, clamped into the box
  box_center,  // midpoint of the calibration box
  fixed,       // CalibrationConfig::R0, C0
};

std::string_view to_string(InitialGuess guess) noexcept;
InitialGuess parse_initial_guess(std::string_view text);

struct CalibrationConfig {
  EmulatorOptions emulator{};
  InitialGuess initial_guess = InitialGuess::wk2_fit;
  double R0 = 1.75;
  double C0 = 1.75;
  gp::MleOptions bias_mle{gp::ExponentMode::fixed_2, 4, 0xb1a5, false, {1e-5, 3000, 1}};
  McmcConfig mcmc{};
  double prior_multiple = 5.0;
  /// Spacing of the prediction grid in seconds; 0 predicts at the field phases.
  double grid_step = 0.0;
  ProductsOptions products{};
  std::size_t min_summary_draws = 1000;
};

struct CalibrationResult {
  FieldInputs field;
  TrainedEmulator emulator;
  BiasModel bias;
  CalibrationPriors priors;
  PosteriorSamples samples;
  PosteriorSummary summary;
  Products products;
};

/// Prediction inputs (I, t) over one cycle of `inflow`, spaced by `step`.
Eigen::MatrixXd regular_grid(const InflowWaveform& inflow, double step);

/// (R0, C0) for stage 2 under `config.initial_guess`.
std::pair<double, double> initial_guess(const FieldData& data, const InflowWaveform& inflow,
                                        const CalibrationConfig& config);

/// Runs every stage in order. A failure is rethrown as StageError naming the
/// stage ("field", "stage1", "stage2", "mcmc", "summary", "products").
CalibrationResult calibrate(const FieldData& data, const InflowWaveform& inflow, const CalibrationConfig& config = {});

}  // namespace wkcal::koh
