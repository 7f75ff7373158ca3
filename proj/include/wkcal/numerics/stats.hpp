#pragma once

#include <span>
#include <vector>

namespace wkcal::numerics {

double mean(std::span<const double> x);

/// Unbiased sample variance; zero for fewer than two values.
double variance(std::span<const double> x);

/// Quantile with linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile(std::span<const double> x, double p);

/// Same as quantile() for input that is already sorted ascending.
double quantile_sorted(std::span<const double> sorted, double p);

}  // namespace wkcal::numerics
