#include "wkcal/numerics/sampling.hpp"

#include <numeric>
#include <utility>
#include <vector>

#include "wkcal/numerics/rng.hpp"

namespace wkcal::numerics {

Eigen::MatrixXd latin_hypercube(std::size_t n, std::size_t dims, std::uint64_t key) {
  Eigen::MatrixXd points(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims));
  std::vector<std::size_t> strata(n);
  for (std::size_t d = 0; d < dims; ++d) {
    CounterRng rng(derive_key(key, d));
    std::iota(strata.begin(), strata.end(), 0);
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
      std::swap(strata[i - 1], strata[j]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) =
          (static_cast<double>(strata[i]) + rng.uniform()) / static_cast<double>(n);
    }
  }
  return points;
}

}  // namespace wkcal::numerics
