#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wkcal/koh/mcmc.hpp"

namespace wkcal::koh {

struct ParameterPosterior {
  std::string name;
  double mean = 0.0;
  double map = 0.0;    // highest mode of the kernel density estimate
  double lower = 0.0;  // 5% quantile
  double upper = 0.0;  // 95% quantile
  bool bimodal = false;
  std::vector<double> modes;  // both modes when bimodal, else the MAP alone
};

struct Kde {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
};

/// Gaussian-kernel density on a regular grid spanning the draws plus three
/// bandwidths each side; bandwidth 0.9 * min(sd, IQR / 1.34) * n^(-1/5).
Kde kernel_density(std::span<const double> draws, std::size_t grid_size = 512);

/// Requires at least `min_draws` draws. Flags bimodality when the two highest
/// density peaks are separated by a trough below 80% of the lower peak. Peaks
/// lower than 5% of the highest one are ignored.
ParameterPosterior summarize_parameter(std::string name, std::span<const double> draws, std::size_t min_draws = 1000);

struct PosteriorSummary {
  std::vector<ParameterPosterior> parameters;  // R, C, lambda_b, lambda_f
  std::size_t n_draws = 0;

  const ParameterPosterior& at(const std::string& name) const;
};

PosteriorSummary summarize(const PosteriorSamples& samples, std::size_t min_draws = 1000);

}  // namespace wkcal::koh
