#pragma once

// Posterior predictive bands: pure model, discrepancy, and bias-corrected.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "wkcal/koh/bias.hpp"
#include "wkcal/koh/emulator.hpp"
#include "wkcal/koh/field.hpp"
#include "wkcal/koh/mcmc.hpp"

namespace wkcal::koh {

enum class BandKind { bias_corrected, pure_model, bias };

std::string_view to_string(BandKind kind) noexcept;

struct PredictionBand {
  BandKind kind = BandKind::pure_model;
  std::vector<double> time;
  std::vector<double> mean;
  std::vector<double> lower;  // 5% pointwise quantile
  std::vector<double> upper;  // 95% pointwise quantile

  /// Average of upper - lower over the grid.
  double average_width() const;
};

struct ProductsOptions {
  std::uint64_t seed = 0x9d;
  double max_skip_fraction = 0.05;
  bool mean_only = false;  // ignore emulator predictive covariance, as in the sampler flag
};

struct Products {
  PredictionBand bias_corrected, pure_model, bias;
  std::size_t skipped = 0;
};

/// For every draw: the emulator prediction at (grid, R, C); the discrepancy GP
/// conditioned on the field residuals y - mu_em(R, C) under the sampled precisions;
/// their sum plus observation noise for the bias-corrected band. Band means are
/// averages of the per-draw conditional means, so the bias-corrected mean equals
/// the pure-model mean plus the bias mean. `grid` rows are (I, t).
Products predict_products(const PosteriorSamples& samples, const TrainedEmulator& emulator, const BiasModel& bias,
                          const FieldInputs& field, const Eigen::MatrixXd& grid, const ProductsOptions& options = {});

}  // namespace wkcal::koh
