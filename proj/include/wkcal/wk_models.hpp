#pragma once

// Two- and three-element Windkessel models.
//
// Both models reduce to the scalar linear ODE
//
//   dP/dt = -P / tau + a * I(t) + b * dI/dt
//
// with tau = RC, a = 1/C, b = 0 for WK2 and tau = R2*C, a = (1 + R1/R2)/C,
// b = R1 for WK3. Integration is classical fixed-step RK4 with steps aligned to
// the forcing breakpoints (systole end, table nodes) so the kink in the inflow
// never falls inside a step.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace wkcal {

enum class StrokeProfile { half_sine, table, constant };

struct FlowSample {
  double time;  // s, within [0, period)
  double flow;  // ml/s
};

/// Inflow value and its time derivative at one instant.
struct InflowValue {
  double flow;  // ml/s
  double rate;  // ml/s^2
};

/// Periodic aortic inflow I(t). The valve is closed on [systole_duration, period),
/// where both flow and rate are exactly zero (the constant profile excepted).
class InflowWaveform {
 public:
  /// Half-sine pulse A*sin(pi t / systole) scaled so the cycle-mean flow equals `mean_flow`.
  static InflowWaveform half_sine(double period = 0.85, double systole_duration = 0.3,
                                  double mean_flow = 90.0);

  /// Measured waveform. Samples at or after `systole_duration` are ignored; the
  /// remaining ones are anchored with zero flow at phase 0 (when no sample sits
  /// there) and at systole end. Between nodes the flow is a cubic Hermite curve
  /// whose node slopes are centered differences (one-sided at the two end
  /// nodes); the rate is its exact derivative.
  static InflowWaveform table(double period, double systole_duration,
                              std::vector<FlowSample> samples);

  /// Time-invariant inflow. Used for equilibrium and free-decay checks.
  static InflowWaveform constant(double flow, double period = 0.85);

  StrokeProfile profile() const noexcept { return profile_; }
  double period() const noexcept { return period_; }
  double systole_duration() const noexcept { return systole_; }
  /// Peak of the half-sine, or the constant level.
  double amplitude() const noexcept { return amplitude_; }
  const std::vector<FlowSample>& samples() const noexcept { return samples_; }

  /// I(t), dI/dt for any t >= 0 (right-continuous at breakpoints).
  InflowValue at(double t) const;

  /// Cycle-relative times where the forcing is not smooth; sorted, first is 0.
  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }

  /// Evaluates the smooth piece starting at breakpoints()[piece] at cycle phase `phase`.
  /// Valid on the closed piece interval, so steps can end exactly on a breakpoint.
  InflowValue on_piece(double phase, std::size_t piece) const;

  /// Index of the piece containing cycle phase `phase` in [0, period).
  std::size_t piece_of(double phase) const;

  double phase_of(double t) const;

  double mean_flow() const;
  double peak_flow() const;

 private:
  InflowWaveform() = default;

  StrokeProfile profile_ = StrokeProfile::constant;
  double period_ = 1.0;
  double systole_ = 1.0;
  double amplitude_ = 0.0;
  std::vector<FlowSample> samples_;
  struct Node {
    double time, flow, rate;
  };
  std::vector<Node> nodes_;  // table mode only; last node is (systole, 0)
  std::vector<double> breakpoints_;
};

enum class ModelKind { wk2, wk3 };

std::string_view to_string(ModelKind kind) noexcept;
ModelKind parse_model_kind(std::string_view text);

struct Wk2Params {
  double R;  // mmHg s/ml
  double C;  // ml/mmHg
};

struct Wk3Params {
  double R1;  // characteristic impedance, mmHg s/ml
  double R2;  // peripheral resistance, mmHg s/ml
  double C;   // ml/mmHg
};

using WkParams = std::variant<Wk2Params, Wk3Params>;

void validate(const Wk2Params& p);
void validate(const Wk3Params& p);
ModelKind kind_of(const WkParams& p) noexcept;

/// Total vascular resistance: R for WK2, R1 + R2 for WK3.
double total_resistance(const WkParams& p) noexcept;
double compliance(const WkParams& p) noexcept;

/// Coefficients of dP/dt = -decay * P + flow_gain * I + rate_gain * dI/dt.
struct LinearRhs {
  double decay;
  double flow_gain;
  double rate_gain;

  static LinearRhs of(const Wk2Params& p);
  static LinearRhs of(const Wk3Params& p);
  static LinearRhs of(const WkParams& p);
};

struct SolverOptions {
  /// Upper bound on the RK4 step; each interval between knots is split evenly.
  double max_step = 1e-3;
  /// Cycles integrated before sampling. Zero disables the convergence check.
  std::size_t n_warmup_cycles = 1;
  /// Hard cap on warmup when the convergence test has not yet passed.
  std::size_t max_warmup_cycles = 500;
  /// Converged when consecutive cycles differ by less than this (mmHg).
  double convergence_tol = 1e-6;
  /// Start value P(0). Unset: start on the periodic orbit of the discrete RK4 cycle map.
  std::optional<double> initial_pressure;
};

struct PressureSeries {
  std::vector<double> grid;    // s, strictly increasing
  std::vector<double> values;  // mmHg
  bool converged = false;
};

/// Integrates WK2 over `grid` (absolute times >= 0, cycle starts at t = 0).
PressureSeries simulate_wk2(const InflowWaveform& inflow, const Wk2Params& params,
                            std::span<const double> grid, const SolverOptions& options = {});

PressureSeries simulate_wk3(const InflowWaveform& inflow, const Wk3Params& params,
                            std::span<const double> grid, const SolverOptions& options = {});

PressureSeries simulate(const InflowWaveform& inflow, const WkParams& params,
                        std::span<const double> grid, const SolverOptions& options = {});

/// P0 * exp(-dt / RC): free decay while the valve is closed.
double diastolic_decay(double p0, double R, double C, double dt);

/// Trapezoidal cycle-mean pressure over trapezoidal cycle-mean flow.
/// `flow` is the inflow sampled on series.grid, which should span whole cycles.
double mean_ratio_resistance(const PressureSeries& series, std::span<const double> flow);

/// Steady-state pressure at fixed cycle phases, reusable across parameter sets.
/// Step layout and inflow values at every RK4 stage are computed once, which makes
/// repeated solves (least squares, emulator design runs) cheap.
class PeriodicSolver {
 public:
  /// `phases` must be strictly increasing within [0, period).
  PeriodicSolver(InflowWaveform inflow, std::vector<double> phases, SolverOptions options = {});

  struct Result {
    std::vector<double> values;  // pressure at each phase
    bool converged = false;
  };

  Result solve(const LinearRhs& rhs) const;

  struct Start {
    double pressure;
    bool converged;
  };
  /// State at phase 0 after warmup.
  Start periodic_start(const LinearRhs& rhs) const;
  Result solve(const WkParams& params) const { return solve(LinearRhs::of(params)); }

  const std::vector<double>& phases() const noexcept { return phases_; }
  const InflowWaveform& inflow() const noexcept { return inflow_; }

 private:
  struct Step {
    double t;
    double h;
    InflowValue start, mid, end;
  };

  double run_cycle(const LinearRhs& rhs, double p0, double* out) const;

  InflowWaveform inflow_;
  std::vector<double> phases_;
  SolverOptions options_;
  std::vector<Step> steps_;
  // For each phase, number of steps completed before reaching it.
  std::vector<std::size_t> output_after_;
};

}  // namespace wkcal
