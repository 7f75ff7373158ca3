#include "wkcal/koh/field.hpp"

#include <algorithm>
#include <cmath>

#include "wkcal/errors.hpp"

namespace wkcal::koh {

namespace {
constexpr double kPhaseMerge = 1e-9;
}

Eigen::MatrixXd FieldInputs::phase_inputs() const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(phases.size()), 2);
  for (std::size_t i = 0; i < phases.size(); ++i) {
    out(static_cast<Eigen::Index>(i), 0) = phase_flow[i];
    out(static_cast<Eigen::Index>(i), 1) = phases[i];
  }
  return out;
}

FieldInputs make_field_inputs(const FieldData& data) {
  if (!data.has_pressure()) throw DataError("calibration needs pressure at every observation");
  const FieldData synced = synchronize_cycles(data);
  const auto n = static_cast<Eigen::Index>(synced.size());

  FieldInputs f;
  f.x.resize(n, 2);
  f.y.resize(n);
  std::vector<double> times;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = synced.observations[static_cast<std::size_t>(i)];
    f.x(i, 0) = o.flow;
    f.x(i, 1) = o.time;
    f.y[i] = o.pressure;
    times.push_back(o.time);
  }

  std::vector<double> sorted(times);
  std::sort(sorted.begin(), sorted.end());
  for (double t : sorted) {
    if (f.phases.empty() || t - f.phases.back() > kPhaseMerge) f.phases.push_back(t);
  }
  f.phase_flow.assign(f.phases.size(), 0.0);
  f.phase_pressure.assign(f.phases.size(), 0.0);
  std::vector<int> counts(f.phases.size(), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto it = std::lower_bound(f.phases.begin(), f.phases.end(), times[static_cast<std::size_t>(i)] - kPhaseMerge);
    const auto k = static_cast<std::size_t>(it - f.phases.begin());
    f.phase_of.push_back(k);
    f.phase_flow[k] += f.x(i, 0);
    f.phase_pressure[k] += f.y[i];
    ++counts[k];
  }
  for (std::size_t k = 0; k < f.phases.size(); ++k) {
    f.phase_flow[k] /= counts[k];
    f.phase_pressure[k] /= counts[k];
  }
  return f;
}

}  // namespace wkcal::koh
