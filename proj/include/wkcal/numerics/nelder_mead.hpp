#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace wkcal::numerics {

struct BoxBounds {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t size() const noexcept { return lower.size(); }
  void clamp(std::span<double> x) const;
  bool contains(std::span<const double> x) const;
};

struct NelderMeadOptions {
  /// Converged once every vertex is within this sup-norm distance of the best vertex.
  double tolerance = 1e-6;
  std::size_t max_evaluations = 4000;
  /// Rebuild the simplex around the optimum after convergence; guards against collapse.
  std::size_t restarts = 1;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

/// Downhill simplex minimization. With `bounds`, every trial point is clamped
/// coordinate-wise into the box. Non-finite objective values count as +inf.
NelderMeadResult nelder_mead(const Objective& f, std::span<const double> start,
                             std::span<const double> steps,
                             const std::optional<BoxBounds>& bounds = std::nullopt,
                             const NelderMeadOptions& options = {});

}  // namespace wkcal::numerics
