#pragma once

// Stage 2 sampling of (R, C, lambda_b, lambda_f) with emulator and bias
// hyperparameters held fixed.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "wkcal/koh/bias.hpp"
#include "wkcal/koh/emulator.hpp"
#include "wkcal/koh/field.hpp"

namespace wkcal::koh {

/// Uniform box on (R, C); exponential priors on the two precisions, each with
/// mean `multiple` times its stage-2 estimate.
struct CalibrationPriors {
  CalibrationBox box{};
  double lambda_b_mean = 1.0;
  double lambda_f_mean = 1.0;

  static CalibrationPriors from_estimates(const BiasModel& bias, double multiple = 5.0, CalibrationBox box = {});
  /// -inf outside the support.
  double log_density(double R, double C, double lambda_b, double lambda_f) const noexcept;
};

struct McmcConfig {
  std::size_t chains = 4;
  std::size_t iterations = 30000;
  double burn_in_fraction = 0.5;
  /// Keep every thin-th post-burn-in iteration; 0 picks floor(pooled / target_draws).
  std::size_t thin = 0;
  std::size_t target_draws = 7000;
  std::uint64_t seed = 0x4d43;
  double target_acceptance = 0.3;
  bool prior_only = false;  // likelihood replaced by a constant
  bool mean_only = false;   // drop the emulator predictive covariance
};

/// Log posterior of the calibration model on the log-precision scale (Jacobian included).
class LogPosterior {
 public:
  LogPosterior(const TrainedEmulator& emulator, const BiasModel& bias, const CalibrationPriors& priors,
               const FieldInputs& field, bool prior_only = false, bool mean_only = false);

  struct Value {
    double log_posterior;
    bool conditioning_failed;
  };
  /// theta = (R, C, log lambda_b, log lambda_f).
  Value operator()(const Eigen::Vector4d& theta) const;

  /// log N(y | mu_em(R, C), Sigma_em + K_b / lambda_b + I / lambda_f); nullopt if not positive definite.
  std::optional<double> log_likelihood(double R, double C, double lambda_b, double lambda_f) const;

  const CalibrationPriors& priors() const noexcept { return priors_; }

 private:
  const TrainedEmulator& emulator_;
  CalibrationPriors priors_;
  Eigen::VectorXd y_;
  gp::GridGp::Targets targets_;
  Eigen::MatrixXd bias_gram_;
  bool prior_only_;
  bool mean_only_;
};

struct Draw {
  double R, C, lambda_b, lambda_f;
  int chain;
  std::size_t iteration;
};

struct PosteriorSamples {
  std::vector<Draw> draws;  // chain-major, thinned, post burn-in
  std::size_t chains = 0;
  std::size_t iterations = 0;
  std::size_t burn_in = 0;
  std::size_t thin = 1;
  std::vector<double> acceptance;            // post burn-in, per chain
  std::vector<std::size_t> conditioning_rejections;  // per chain
  double rhat_R = 1.0;
  double rhat_C = 1.0;

  std::vector<double> column(double Draw::*field) const;
  std::vector<std::vector<double>> by_chain(double Draw::*field) const;
};

/// Random-walk Metropolis, one chain per stream. The proposal covariance and
/// scale adapt during burn-in only, so the retained draws come from a fixed kernel.
PosteriorSamples run_mcmc(const TrainedEmulator& emulator, const BiasModel& bias, const CalibrationPriors& priors,
                          const FieldInputs& field, const McmcConfig& config);

/// Split-R-hat: each chain halved, then the between/within variance ratio.
double split_rhat(const std::vector<std::vector<double>>& chains);

}  // namespace wkcal::koh
