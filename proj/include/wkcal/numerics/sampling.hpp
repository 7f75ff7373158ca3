#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

namespace wkcal::numerics {

/// Latin-hypercube sample of n points in [0, 1)^dims: each coordinate hits every
/// one of the n strata exactly once.
Eigen::MatrixXd latin_hypercube(std::size_t n, std::size_t dims, std::uint64_t key);

}  // namespace wkcal::numerics
