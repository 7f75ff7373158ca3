#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wkcal::koh {

struct InfluentialPoints {
  std::vector<std::size_t> indices;  // sorted, unique, into the cycle grid
  std::vector<double> times;
  std::vector<double> flows;
  std::vector<double> pressures;
};

/// Picks k points of one cycle grid. Always kept: the cycle start, the pressure
/// peak, the end of inflow (first sample after peak flow with flow at or below
/// 5% of that peak) and the last sample. The remaining points are added greedily,
/// each time taking the grid time farthest from everything already chosen.
/// Requires 5 <= k <= grid size.
InfluentialPoints select_influential_points(std::span<const double> times, std::span<const double> flows,
                                            std::span<const double> pressures, std::size_t k);

}  // namespace wkcal::koh
