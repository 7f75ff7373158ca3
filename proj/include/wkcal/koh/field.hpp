#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "wkcal/synthetic.hpp"

namespace wkcal::koh {

/// Field observations arranged for calibration. Cycles are synchronized, so the
/// time input is the phase within the cycle.
struct FieldInputs {
  Eigen::MatrixXd x;  // n x 2: (flow, phase)
  Eigen::VectorXd y;  // observed pressure

  // One entry per distinct phase, averaged over cycles.
  std::vector<double> phases;
  std::vector<double> phase_flow;
  std::vector<double> phase_pressure;
  std::vector<std::size_t> phase_of;  // observation -> index into phases

  Eigen::Index size() const noexcept { return y.size(); }
  /// (flow, phase) rows for the distinct phases.
  Eigen::MatrixXd phase_inputs() const;
};

/// Requires pressure at every observation.
FieldInputs make_field_inputs(const FieldData& data);

}  // namespace wkcal::koh
