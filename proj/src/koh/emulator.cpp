#include "wkcal/koh/emulator.hpp"

#include <stdexcept>

#include "wkcal/numerics/parallel.hpp"
#include "wkcal/numerics/sampling.hpp"

namespace wkcal::koh {

Eigen::VectorXd simulate_design_row(const InflowWaveform& inflow, const std::vector<double>& phases, double R, double C,
                                    const SolverOptions& solver) {
  const PeriodicSolver cycle(inflow, phases, solver);
  const auto result = cycle.solve(Wk2Params{R, C});
  return Eigen::Map<const Eigen::VectorXd>(result.values.data(), static_cast<Eigen::Index>(result.values.size()));
}

EmulatorDesign build_design(const FieldInputs& field, const InflowWaveform& inflow, const EmulatorOptions& options) {
  if (!(options.box.lo > 0.0 && options.box.lo < options.box.hi)) throw std::invalid_argument("invalid calibration box");
  EmulatorDesign d;
  d.box = options.box;
  d.points = select_influential_points(field.phases, field.phase_flow, field.phase_pressure, options.n_influential);
  const auto k = static_cast<Eigen::Index>(d.points.indices.size());
  const auto n = static_cast<Eigen::Index>(options.design_size);
  if (n * k < 40) throw std::invalid_argument("emulator design needs at least 40 rows");

  d.field_inputs.resize(k, 2);
  for (Eigen::Index q = 0; q < k; ++q) {
    d.field_inputs(q, 0) = d.points.flows[static_cast<std::size_t>(q)];
    d.field_inputs(q, 1) = d.points.times[static_cast<std::size_t>(q)];
  }
  const double width = options.box.hi - options.box.lo;
  d.calibration = options.box.lo + width * numerics::latin_hypercube(options.design_size, 2, options.seed).array();

  const PeriodicSolver cycle(inflow, d.points.times, options.solver);
  d.runs.resize(n, k);
  numerics::parallel_for(options.design_size, [&](std::size_t p) {
    const auto i = static_cast<Eigen::Index>(p);
    const auto r = cycle.solve(Wk2Params{d.calibration(i, 0), d.calibration(i, 1)});
    for (Eigen::Index q = 0; q < k; ++q) d.runs(i, q) = r.values[static_cast<std::size_t>(q)];
  });
  return d;
}

gp::GpModel::JointPrediction TrainedEmulator::predict(const gp::GridGp::Targets& targets, double R, double C,
                                                      bool with_covariance) const {
  return gp.predict(targets, Eigen::RowVector2d(R, C), with_covariance);
}

TrainedEmulator stage1_train_emulator(EmulatorDesign design, const gp::MleOptions& mle) {
  if (design.runs.size() < 40) throw std::invalid_argument("emulator design needs at least 40 rows");
  gp::MleOptions opts = mle;
  opts.exponents = gp::ExponentMode::free;
  auto model = gp::fit_grid_mle(design.calibration, design.field_inputs, design.runs, opts);
  return {std::move(model), std::move(design)};
}

}  // namespace wkcal::koh
