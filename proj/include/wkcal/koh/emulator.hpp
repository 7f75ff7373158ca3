#pragma once

// Stage 1: a GP emulator of the WK2 simulator over inputs (I, t, R, C).

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

#include "wkcal/grid_gp.hpp"
#include "wkcal/koh/field.hpp"
#include "wkcal/koh/influential.hpp"
#include "wkcal/wk_models.hpp"

namespace wkcal::koh {

struct CalibrationBox {
  double lo = 0.5;
  double hi = 3.0;

  bool contains(double R, double C) const noexcept { return R >= lo && R <= hi && C >= lo && C <= hi; }
};

struct EmulatorOptions {
  std::size_t design_size = 200;    // Latin-hypercube points over (R, C)
  std::size_t n_influential = 12;   // field points crossed with every design point
  std::uint64_t seed = 0xe3;
  CalibrationBox box{};
  gp::MleOptions mle{gp::ExponentMode::free, 2, 0x51, true, {1e-4, 2500, 1}};
  SolverOptions solver{};
};

struct EmulatorDesign {
  Eigen::MatrixXd calibration;   // N x 2: (R, C)
  Eigen::MatrixXd field_inputs;  // k x 2: (I, t)
  Eigen::MatrixXd runs;          // N x k simulated WK2 pressure
  InfluentialPoints points;
  CalibrationBox box;
};

/// Builds the crossed design from the field cycle and runs the simulator on it.
EmulatorDesign build_design(const FieldInputs& field, const InflowWaveform& inflow, const EmulatorOptions& options);

/// WK2 pressure at the design's influential phases for one (R, C).
Eigen::VectorXd simulate_design_row(const InflowWaveform& inflow, const std::vector<double>& phases, double R, double C,
                                    const SolverOptions& solver = {});

struct TrainedEmulator {
  gp::GridGp gp;
  EmulatorDesign design;

  /// Latent predictive distribution at (R, C) for prepared field targets.
  gp::GpModel::JointPrediction predict(const gp::GridGp::Targets& targets, double R, double C,
                                       bool with_covariance = true) const;
};

/// Maximum-likelihood fit with free exponents; hyperparameters stay fixed afterwards.
TrainedEmulator stage1_train_emulator(EmulatorDesign design, const gp::MleOptions& mle);

}  // namespace wkcal::koh
