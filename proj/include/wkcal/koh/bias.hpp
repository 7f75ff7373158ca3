#pragma once

// Stage 2 initialization: a zero-mean squared-exponential GP for the model
// discrepancy b(I, t), fitted to the residuals of the emulator at an initial guess.

#include <Eigen/Dense>

#include "wkcal/gp.hpp"
#include "wkcal/koh/emulator.hpp"
#include "wkcal/koh/field.hpp"

namespace wkcal::koh {

struct BiasModel {
  gp::PowerExpKernel kernel;  // unit variance, lengthscales fixed from the fit
  gp::InputScaling scaling;   // maps raw (I, t) to the fitted units
  double lambda_b_hat = 1.0;  // 1 / fitted bias variance
  double lambda_f_hat = 1.0;  // fitted noise precision
  double R0 = 1.75;
  double C0 = 1.75;
  Eigen::VectorXd residuals;

  /// Unit-variance correlation between raw (I, t) rows.
  Eigen::MatrixXd correlation(const Eigen::Ref<const Eigen::MatrixXd>& a,
                              const Eigen::Ref<const Eigen::MatrixXd>& b) const;
};

/// Residuals r = y - emulator mean at (R0, C0), then a dense MLE fit of an
/// uncentered squared-exponential GP on (I, t).
BiasModel stage2_init_bias(const TrainedEmulator& emulator, const FieldInputs& field, double R0, double C0,
                           const gp::MleOptions& mle = {gp::ExponentMode::fixed_2, 4, 0xb1a5, false, {1e-5, 3000, 1}});

/// Same fit from precomputed residuals.
BiasModel fit_bias(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& residuals, const gp::MleOptions& mle);

}  // namespace wkcal::koh
