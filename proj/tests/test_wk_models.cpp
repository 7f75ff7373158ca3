#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "oracles/rkf45.hpp"
#include "wkcal/errors.hpp"
#include "wkcal/wk_models.hpp"

using namespace wkcal;

namespace {

constexpr double kPeriod = 0.85;
constexpr double kSystole = 0.3;

std::vector<double> sample_grid(double step, std::size_t cycles) {
  std::vector<double> grid;
  for (std::size_t k = 0; static_cast<double>(k) * step < static_cast<double>(cycles) * kPeriod - 1e-9; ++k) {
    grid.push_back(static_cast<double>(k) * step);
  }
  return grid;
}

// Steady periodic response of dP/dt = -d P + a I + b I' to the default half-sine,
// computed with the adaptive reference solver. Integration stops at every valve
// event so each segment sees smooth forcing.
std::vector<double> oracle_steady(double d, double a, double b, const std::vector<double>& grid) {
  const double amp = 90.0 * std::numbers::pi * kPeriod / (2.0 * kSystole);
  const double w = std::numbers::pi / kSystole;
  auto segment = [&](double t0, double p0, double t1, double cycle_start, bool systolic) {
    auto f = [&](double t, double p) {
      const double phase = t - cycle_start;
      const double flow = systolic ? amp * std::sin(w * phase) : 0.0;
      const double rate = systolic ? amp * w * std::cos(w * phase) : 0.0;
      return -d * p + a * flow + b * rate;
    };
    return oracle::rkf45(f, t0, p0, t1);
  };

  double p = 80.0;
  for (int c = 0; c < 120; ++c) {
    p = segment(0.0, p, kSystole, 0.0, true);
    p = segment(kSystole, p, kPeriod, 0.0, false);
  }

  std::vector<double> stops(grid);
  const double t_end = grid.back();
  for (double c = 0.0; c <= t_end; c += kPeriod) {
    stops.push_back(c);
    if (c + kSystole < t_end) stops.push_back(c + kSystole);
  }
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end(),
                          [](double x, double y) { return std::abs(x - y) < 1e-12; }),
              stops.end());

  std::vector<double> out;
  std::size_t g = 0;
  for (std::size_t i = 0; i < stops.size(); ++i) {
    if (g < grid.size() && std::abs(grid[g] - stops[i]) < 1e-12) out.push_back(p), ++g;
    if (i + 1 == stops.size()) break;
    const double mid = 0.5 * (stops[i] + stops[i + 1]);
    const double cycle_start = std::floor(mid / kPeriod) * kPeriod;
    p = segment(stops[i], p, stops[i + 1], cycle_start, mid - cycle_start < kSystole);
  }
  return out;
}

double sup_gap(const std::vector<double>& x, const std::vector<double>& y) {
  double gap = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) gap = std::max(gap, std::abs(x[i] - y[i]));
  return gap;
}

}  // namespace

TEST(Inflow, HalfSineHasRequestedMeanAndClosedValve) {
  const auto inflow = InflowWaveform::half_sine();
  EXPECT_NEAR(inflow.mean_flow(), 90.0, 1e-12);
  EXPECT_NEAR(inflow.amplitude(), 90.0 * std::numbers::pi * 0.85 / 0.6, 1e-9);
  EXPECT_EQ(inflow.at(0.5).flow, 0.0);
  EXPECT_EQ(inflow.at(0.5).rate, 0.0);
  EXPECT_NEAR(inflow.at(0.15).flow, inflow.amplitude(), 1e-9);
  EXPECT_NEAR(inflow.at(0.85 + 0.15).flow, inflow.amplitude(), 1e-9);
}

TEST(Inflow, RejectsInvalidShapes) {
  EXPECT_THROW(InflowWaveform::half_sine(0.85, 0.9), std::invalid_argument);
  EXPECT_THROW(InflowWaveform::half_sine(-1.0, 0.3), std::invalid_argument);
  EXPECT_THROW(InflowWaveform::table(0.85, 0.3, {{0.1, 1.0}, {0.05, 2.0}}), std::invalid_argument);
  EXPECT_THROW(InflowWaveform::table(0.85, 0.3, {{0.0, 1.0}, {0.9, 2.0}}), std::invalid_argument);
}

TEST(Inflow, TableRateUsesCenteredDifferences) {
  // Linear ramp sampled every 0.05 s: centered and one-sided differences all equal the slope.
  std::vector<FlowSample> samples;
  for (int k = 0; k <= 4; ++k) samples.push_back({0.05 * k, 100.0 * 0.05 * k});
  const auto inflow = InflowWaveform::table(0.85, 0.3, samples);
  EXPECT_NEAR(inflow.at(0.075).flow, 7.5, 1e-12);
  EXPECT_NEAR(inflow.at(0.1).rate, 100.0, 1e-9);
  EXPECT_NEAR(inflow.at(0.0).rate, 100.0, 1e-9);
  EXPECT_EQ(inflow.at(0.5).flow, 0.0);
}

TEST(Wk2, ConstantInflowSettlesAtRTimesFlow) {
  const auto inflow = InflowWaveform::constant(90.0);
  const auto grid = sample_grid(0.05, 2);
  for (double C : {0.5, 0.8, 2.5}) {
    const auto series = simulate_wk2(inflow, {1.1, C}, grid);
    EXPECT_TRUE(series.converged);
    for (double p : series.values) EXPECT_NEAR(p, 99.0, 1e-9);
  }
}

TEST(Wk2, ConstantInflowReachedFromFixedStartAfterWarmup) {
  SolverOptions opts;
  opts.initial_pressure = 80.0;
  opts.n_warmup_cycles = 10;
  const auto series = simulate_wk2(InflowWaveform::constant(90.0), {1.1, 0.8}, sample_grid(0.05, 1), opts);
  EXPECT_TRUE(series.converged);
  for (double p : series.values) EXPECT_NEAR(p, 99.0, 1e-5);
}

TEST(Wk2, ZeroInflowHalvesAfterLn2) {
  SolverOptions opts;
  opts.initial_pressure = 100.0;
  opts.n_warmup_cycles = 0;
  const double grid[] = {0.0, std::numbers::ln2};
  const auto series = simulate_wk2(InflowWaveform::constant(0.0), {1.0, 1.0}, grid, opts);
  EXPECT_FALSE(series.converged);
  EXPECT_DOUBLE_EQ(series.values[0], 100.0);
  EXPECT_NEAR(series.values[1], 50.0, 1e-9);
}

TEST(Wk2, ZeroInflowFollowsDiastolicDecayEverywhere) {
  SolverOptions opts;
  opts.initial_pressure = 100.0;
  opts.n_warmup_cycles = 0;
  const auto grid = sample_grid(0.001, 3);
  const auto series = simulate_wk2(InflowWaveform::constant(0.0), {1.1, 0.8}, grid, opts);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double exact = diastolic_decay(100.0, 1.1, 0.8, grid[i]);
    EXPECT_LT(std::abs(series.values[i] - exact) / exact, 1e-6) << "t=" << grid[i];
  }
}

TEST(Wk2, HalfSineMatchesAdaptiveOracle) {
  const auto grid = sample_grid(0.05, 3);
  const auto series = simulate_wk2(InflowWaveform::half_sine(), {1.1, 0.8}, grid);
  const auto ref = oracle_steady(1.0 / (1.1 * 0.8), 1.0 / 0.8, 0.0, grid);
  ASSERT_EQ(ref.size(), grid.size());
  EXPECT_TRUE(series.converged);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_LT(std::abs(series.values[i] - ref[i]) / std::abs(ref[i]), 1e-5) << "t=" << grid[i];
  }
}

TEST(Wk3, HalfSineMatchesAdaptiveOracle) {
  const Wk3Params p{0.1, 1.0, 0.8};
  const auto grid = sample_grid(0.05, 3);
  const auto series = simulate_wk3(InflowWaveform::half_sine(), p, grid);
  const auto ref = oracle_steady(1.0 / (p.R2 * p.C), (1.0 + p.R1 / p.R2) / p.C, p.R1, grid);
  ASSERT_EQ(ref.size(), grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_LT(std::abs(series.values[i] - ref[i]) / std::abs(ref[i]), 1e-5) << "t=" << grid[i];
  }
}

TEST(Wk3, ConstantInflowSettlesAtTotalResistanceTimesFlow) {
  const auto series = simulate_wk3(InflowWaveform::constant(90.0), {0.1, 1.0, 0.8}, sample_grid(0.05, 2));
  for (double p : series.values) EXPECT_NEAR(p, 99.0, 1e-9);
}

TEST(Wk3, ZeroR1ReducesToWk2) {
  const auto inflow = InflowWaveform::half_sine();
  const auto grid = sample_grid(0.01, 3);
  const auto w3 = simulate_wk3(inflow, {0.0, 1.0, 0.8}, grid);
  const auto w2 = simulate_wk2(inflow, {1.0, 0.8}, grid);
  EXPECT_LT(sup_gap(w3.values, w2.values), 1e-8);
}

// Substituting P = Q + R1 I into the WK3 equation gives the WK2 equation for Q
// with R = R2, so WK3 output equals WK2(R2, C) plus R1 I(t) pointwise.
TEST(Wk3, EqualsShiftedWk2Output) {
  const auto inflow = InflowWaveform::half_sine();
  const auto grid = sample_grid(0.01, 2);
  for (double r1 : {0.02, 0.1, 0.3}) {
    const auto w3 = simulate_wk3(inflow, {r1, 1.0, 0.8}, grid);
    const auto w2 = simulate_wk2(inflow, {1.0, 0.8}, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      EXPECT_NEAR(w3.values[i], w2.values[i] + r1 * inflow.at(grid[i]).flow, 1e-6);
    }
  }
}

TEST(Wk3, GapToWk2GrowsWithR1) {
  const auto inflow = InflowWaveform::half_sine();
  const auto grid = sample_grid(0.005, 1);
  const auto w2 = simulate_wk2(inflow, {1.0, 0.8}, grid);
  double previous = -1.0;
  for (double r1 : {0.0, 0.02, 0.05, 0.1, 0.2}) {
    const double gap = sup_gap(simulate_wk3(inflow, {r1, 1.0, 0.8}, grid).values, w2.values);
    EXPECT_GE(gap, previous);
    previous = gap;
  }
}

TEST(Solver, HalvingTheStepBarelyMovesTheSolution) {
  const auto inflow = InflowWaveform::half_sine();
  const auto grid = sample_grid(0.01, 2);
  SolverOptions fine;
  fine.max_step = 5e-4;
  for (const WkParams& p : {WkParams{Wk2Params{1.1, 0.8}}, WkParams{Wk3Params{0.1, 1.0, 0.8}}}) {
    const auto coarse = simulate(inflow, p, grid);
    const auto halved = simulate(inflow, p, grid, fine);
    EXPECT_LT(sup_gap(coarse.values, halved.values), 1e-4);
  }
}

TEST(Solver, PeriodicSolverAgreesWithGridSimulation) {
  const auto inflow = InflowWaveform::half_sine();
  std::vector<double> phases;
  for (int k = 0; k < 17; ++k) phases.push_back(0.05 * k);
  const PeriodicSolver solver(inflow, phases);
  const auto cycle = solver.solve(Wk3Params{0.05, 0.9, 0.8});
  const auto series = simulate_wk3(inflow, {0.05, 0.9, 0.8}, sample_grid(0.05, 3));
  EXPECT_TRUE(cycle.converged);
  for (std::size_t i = 0; i < series.grid.size(); ++i) {
    EXPECT_NEAR(series.values[i], cycle.values[i % 17], 1e-8);
  }
}

TEST(Solver, NonFiniteStateReportsTime) {
  SolverOptions opts;
  opts.initial_pressure = 0.0;
  opts.n_warmup_cycles = 0;
  const double grid[] = {0.0, 0.1};
  try {
    simulate_wk2(InflowWaveform::constant(1e300), {1.0, 1e-20}, grid, opts);
    FAIL() << "expected IntegrationError";
  } catch (const IntegrationError& e) {
    EXPECT_GT(e.time(), 0.0);
    EXPECT_LE(e.time(), 0.1);
  }
}

TEST(Solver, RejectsBadGrids) {
  const auto inflow = InflowWaveform::half_sine();
  const double decreasing[] = {0.1, 0.05};
  EXPECT_THROW(simulate_wk2(inflow, {1.0, 1.0}, decreasing), std::invalid_argument);
  EXPECT_THROW(simulate_wk2(inflow, {1.0, 1.0}, std::span<const double>{}), std::invalid_argument);
  EXPECT_THROW(simulate_wk2(inflow, {-1.0, 1.0}, sample_grid(0.05, 1)), std::invalid_argument);
}

TEST(DiastolicDecay, ClosedFormValues) {
  EXPECT_DOUBLE_EQ(diastolic_decay(100.0, 1.1, 0.8, 0.0), 100.0);
  EXPECT_NEAR(diastolic_decay(100.0, 1.0, 1.0, std::numbers::ln2), 50.0, 1e-12);
  EXPECT_NEAR(diastolic_decay(100.0, 1.1, 0.8, 0.88), 100.0 / std::numbers::e, 1e-12);
  EXPECT_NEAR(diastolic_decay(100.0, 1.1, 0.8, 0.88), 36.788, 1e-3);
  EXPECT_THROW(diastolic_decay(100.0, 1.0, 1.0, -0.1), std::invalid_argument);
  EXPECT_THROW(diastolic_decay(100.0, 0.0, 1.0, 0.1), std::invalid_argument);
}

TEST(MeanRatio, RecoversResistance) {
  const auto inflow = InflowWaveform::half_sine();
  const auto grid = sample_grid(0.001, 1);
  std::vector<double> grid_closed(grid);
  grid_closed.push_back(kPeriod);
  std::vector<double> flow;
  for (double t : grid_closed) flow.push_back(inflow.at(t).flow);

  const auto w2 = simulate_wk2(inflow, {1.1, 0.8}, grid_closed);
  EXPECT_NEAR(mean_ratio_resistance(w2, flow), 1.1, 0.011);
  const auto w3 = simulate_wk3(inflow, {0.02, 1.4, 1.3}, grid_closed);
  EXPECT_NEAR(mean_ratio_resistance(w3, flow), 1.42, 0.0142);
}

TEST(MeanRatio, ConstantInflowIsExact) {
  const auto inflow = InflowWaveform::constant(90.0);
  const auto grid = sample_grid(0.05, 1);
  const auto w2 = simulate_wk2(inflow, {1.1, 0.8}, grid);
  const std::vector<double> flow(grid.size(), 90.0);
  EXPECT_NEAR(mean_ratio_resistance(w2, flow), 1.1, 1e-12);
}

TEST(MeanRatio, ZeroFlowIsDegenerate) {
  const auto grid = sample_grid(0.05, 1);
  const auto w2 = simulate_wk2(InflowWaveform::constant(0.0), {1.1, 0.8}, grid);
  const std::vector<double> flow(grid.size(), 0.0);
  EXPECT_THROW(mean_ratio_resistance(w2, flow), DegenerateInputError);
}

TEST(Params, Validation) {
  EXPECT_THROW(validate(Wk2Params{0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(validate(Wk3Params{-0.1, 1.0, 1.0}), std::invalid_argument);
  EXPECT_NO_THROW(validate(Wk3Params{0.0, 1.0, 1.0}));
  EXPECT_DOUBLE_EQ(total_resistance(Wk3Params{0.1, 1.0, 0.8}), 1.1);
  EXPECT_EQ(parse_model_kind("wk3"), ModelKind::wk3);
  EXPECT_THROW(parse_model_kind("WK4"), std::invalid_argument);
}

TEST(Inflow, TableFromCoarseHalfSineKeepsStrokeVolume) {
  // 0.05 s samples of the default half-sine; linear interpolation would lose 2.3% of the area.
  const auto truth = InflowWaveform::half_sine();
  std::vector<FlowSample> samples;
  for (int k = 0; k < 17; ++k) samples.push_back({0.05 * k, truth.at(0.05 * k).flow});
  const auto inflow = InflowWaveform::table(0.85, 0.3, samples);
  EXPECT_NEAR(inflow.mean_flow() / truth.mean_flow(), 1.0, 2e-3);
  // The rate is the derivative of the interpolant.
  for (double t : {0.02, 0.13, 0.27}) {
    const double h = 1e-6;
    const double fd = (inflow.at(t + h).flow - inflow.at(t - h).flow) / (2.0 * h);
    EXPECT_NEAR(inflow.at(t).rate, fd, 1e-4 * std::abs(fd) + 1e-3);
  }
}
