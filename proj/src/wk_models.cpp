#include "wkcal/wk_models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "wkcal/errors.hpp"

namespace wkcal {

namespace {

constexpr double kKnotMerge = 1e-12;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

double rk4_step(const LinearRhs& r, double p, double h, const InflowValue& s, const InflowValue& m,
                const InflowValue& e) {
  auto f = [&r](double pp, const InflowValue& in) {
    return -r.decay * pp + r.flow_gain * in.flow + r.rate_gain * in.rate;
  };
  const double k1 = f(p, s);
  const double k2 = f(p + 0.5 * h * k1, m);
  const double k3 = f(p + 0.5 * h * k2, m);
  const double k4 = f(p + h * k3, e);
  return p + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// RK4 amplification factor for dp/dt = -decay * p over one step.
double rk4_gain(double z) { return 1.0 - z + z * z / 2.0 - z * z * z / 6.0 + z * z * z * z / 24.0; }

std::size_t substeps(double span, double max_step) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / max_step - 1e-9)));
}

void sort_and_merge(std::vector<double>& knots) {
  std::sort(knots.begin(), knots.end());
  std::vector<double> merged;
  merged.reserve(knots.size());
  for (double k : knots) {
    if (merged.empty() || k - merged.back() > kKnotMerge) merged.push_back(k);
  }
  knots = std::move(merged);
}

}  // namespace

// ---------------------------------------------------------------------------
// InflowWaveform

InflowWaveform InflowWaveform::half_sine(double period, double systole_duration, double mean_flow) {
  require(period > 0.0, "inflow period must be positive");
  require(systole_duration > 0.0 && systole_duration < period,
          "systole duration must lie in (0, period)");
  require(std::isfinite(mean_flow) && mean_flow >= 0.0, "mean flow must be finite and >= 0");
  InflowWaveform w;
  w.profile_ = StrokeProfile::half_sine;
  w.period_ = period;
  w.systole_ = systole_duration;
  // Cycle integral of A sin(pi t / tau) over [0, tau) is 2 A tau / pi.
  w.amplitude_ = mean_flow * std::numbers::pi * period / (2.0 * systole_duration);
  w.breakpoints_ = {0.0, systole_duration};
  return w;
}

InflowWaveform InflowWaveform::table(double period, double systole_duration,
                                     std::vector<FlowSample> samples) {
  require(period > 0.0, "inflow period must be positive");
  require(systole_duration > 0.0 && systole_duration < period,
          "systole duration must lie in (0, period)");
  require(!samples.empty(), "table inflow needs samples");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    require(std::isfinite(samples[i].time) && std::isfinite(samples[i].flow),
            "table inflow samples must be finite");
    require(samples[i].time >= 0.0 && samples[i].time < period,
            "table inflow times must lie in [0, period)");
    if (i > 0) require(samples[i].time > samples[i - 1].time, "table inflow times must increase");
  }

  InflowWaveform w;
  w.profile_ = StrokeProfile::table;
  w.period_ = period;
  w.systole_ = systole_duration;
  w.samples_ = std::move(samples);

  for (const auto& s : w.samples_) {
    if (s.time < systole_duration) w.nodes_.push_back({s.time, s.flow, 0.0});
  }
  if (w.nodes_.empty() || w.nodes_.front().time > 0.0) {
    w.nodes_.insert(w.nodes_.begin(), {0.0, 0.0, 0.0});
  }
  w.nodes_.push_back({systole_duration, 0.0, 0.0});

  auto& n = w.nodes_;
  const std::size_t m = n.size();
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == m ? m - 1 : i + 1;
    n[i].rate = (n[hi].flow - n[lo].flow) / (n[hi].time - n[lo].time);
  }
  for (const auto& node : n) w.breakpoints_.push_back(node.time);
  w.amplitude_ = w.peak_flow();
  return w;
}

InflowWaveform InflowWaveform::constant(double flow, double period) {
  require(period > 0.0, "inflow period must be positive");
  require(std::isfinite(flow), "constant inflow must be finite");
  InflowWaveform w;
  w.profile_ = StrokeProfile::constant;
  w.period_ = period;
  w.systole_ = period;
  w.amplitude_ = flow;
  w.breakpoints_ = {0.0};
  return w;
}

double InflowWaveform::phase_of(double t) const {
  double phase = t - std::floor(t / period_) * period_;
  if (phase >= period_) phase -= period_;
  return std::max(phase, 0.0);
}

std::size_t InflowWaveform::piece_of(double phase) const {
  const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), phase);
  return it == breakpoints_.begin() ? 0 : static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
}

InflowValue InflowWaveform::on_piece(double phase, std::size_t piece) const {
  switch (profile_) {
    case StrokeProfile::constant:
      return {amplitude_, 0.0};
    case StrokeProfile::half_sine: {
      if (piece != 0) return {0.0, 0.0};
      const double w = std::numbers::pi / systole_;
      return {amplitude_ * std::sin(w * phase), amplitude_ * w * std::cos(w * phase)};
    }
    case StrokeProfile::table: {
      if (piece + 1 >= nodes_.size()) return {0.0, 0.0};
      // Cubic Hermite segment through the node values and slopes.
      const Node& a = nodes_[piece];
      const Node& b = nodes_[piece + 1];
      const double h = b.time - a.time;
      const double u = (phase - a.time) / h;
      const double u2 = u * u, u3 = u2 * u;
      const double flow = (2.0 * u3 - 3.0 * u2 + 1.0) * a.flow + (u3 - 2.0 * u2 + u) * h * a.rate +
                          (-2.0 * u3 + 3.0 * u2) * b.flow + (u3 - u2) * h * b.rate;
      const double rate = (6.0 * u2 - 6.0 * u) * (a.flow - b.flow) / h + (3.0 * u2 - 4.0 * u + 1.0) * a.rate +
                          (3.0 * u2 - 2.0 * u) * b.rate;
      return {flow, rate};
    }
  }
  return {0.0, 0.0};
}

InflowValue InflowWaveform::at(double t) const {
  const double phase = phase_of(t);
  return on_piece(phase, piece_of(phase));
}

double InflowWaveform::mean_flow() const {
  switch (profile_) {
    case StrokeProfile::constant:
      return amplitude_;
    case StrokeProfile::half_sine:
      return amplitude_ * 2.0 * systole_ / (std::numbers::pi * period_);
    case StrokeProfile::table: {
      double integral = 0.0;
      for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
        const double h = nodes_[i + 1].time - nodes_[i].time;
        integral += 0.5 * h * (nodes_[i].flow + nodes_[i + 1].flow) + h * h * (nodes_[i].rate - nodes_[i + 1].rate) / 12.0;
      }
      return integral / period_;
    }
  }
  return 0.0;
}

double InflowWaveform::peak_flow() const {
  if (profile_ != StrokeProfile::table) return amplitude_;
  double peak = 0.0;
  for (const auto& n : nodes_) peak = std::max(peak, n.flow);
  return peak;
}

// ---------------------------------------------------------------------------
// Parameters

std::string_view to_string(ModelKind kind) noexcept { return kind == ModelKind::wk2 ? "WK2" : "WK3"; }

ModelKind parse_model_kind(std::string_view text) {
  std::string upper(text);
  for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "WK2") return ModelKind::wk2;
  if (upper == "WK3") return ModelKind::wk3;
  throw std::invalid_argument("unknown model '" + std::string(text) + "' (expected WK2 or WK3)");
}

void validate(const Wk2Params& p) {
  require(std::isfinite(p.R) && p.R > 0.0, "WK2 requires R > 0");
  require(std::isfinite(p.C) && p.C > 0.0, "WK2 requires C > 0");
}

void validate(const Wk3Params& p) {
  require(std::isfinite(p.R1) && p.R1 >= 0.0, "WK3 requires R1 >= 0");
  require(std::isfinite(p.R2) && p.R2 > 0.0, "WK3 requires R2 > 0");
  require(std::isfinite(p.C) && p.C > 0.0, "WK3 requires C > 0");
}

ModelKind kind_of(const WkParams& p) noexcept {
  return std::holds_alternative<Wk2Params>(p) ? ModelKind::wk2 : ModelKind::wk3;
}

double total_resistance(const WkParams& p) noexcept {
  if (const auto* w2 = std::get_if<Wk2Params>(&p)) return w2->R;
  const auto& w3 = std::get<Wk3Params>(p);
  return w3.R1 + w3.R2;
}

double compliance(const WkParams& p) noexcept {
  return std::visit([](const auto& q) { return q.C; }, p);
}

LinearRhs LinearRhs::of(const Wk2Params& p) {
  validate(p);
  return {1.0 / (p.R * p.C), 1.0 / p.C, 0.0};
}

LinearRhs LinearRhs::of(const Wk3Params& p) {
  validate(p);
  return {1.0 / (p.R2 * p.C), (1.0 + p.R1 / p.R2) / p.C, p.R1};
}

LinearRhs LinearRhs::of(const WkParams& p) {
  return std::visit([](const auto& q) { return LinearRhs::of(q); }, p);
}

// ---------------------------------------------------------------------------
// PeriodicSolver

PeriodicSolver::PeriodicSolver(InflowWaveform inflow, std::vector<double> phases,
                               SolverOptions options)
    : inflow_(std::move(inflow)), phases_(std::move(phases)), options_(options) {
  require(options_.max_step > 0.0, "max_step must be positive");
  const double period = inflow_.period();
  for (std::size_t i = 0; i < phases_.size(); ++i) {
    require(std::isfinite(phases_[i]) && phases_[i] >= 0.0 && phases_[i] < period,
            "solver phases must lie in [0, period)");
    if (i > 0) require(phases_[i] > phases_[i - 1], "solver phases must be strictly increasing");
  }

  std::vector<double> knots = inflow_.breakpoints();
  knots.insert(knots.end(), phases_.begin(), phases_.end());
  knots.push_back(period);
  sort_and_merge(knots);

  std::size_t next_phase = 0;
  output_after_.resize(phases_.size());
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    while (next_phase < phases_.size() && phases_[next_phase] <= knots[k] + kKnotMerge) {
      output_after_[next_phase++] = steps_.size();
    }
    const double a = knots[k];
    const double b = knots[k + 1];
    const std::size_t piece = inflow_.piece_of(0.5 * (a + b));
    const std::size_t n = substeps(b - a, options_.max_step);
    const double h = (b - a) / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double ts = a + static_cast<double>(j) * h;
      const double te = j + 1 == n ? b : a + static_cast<double>(j + 1) * h;
      steps_.push_back({ts, te - ts, inflow_.on_piece(ts, piece),
                        inflow_.on_piece(0.5 * (ts + te), piece), inflow_.on_piece(te, piece)});
    }
  }
}

double PeriodicSolver::run_cycle(const LinearRhs& rhs, double p0, double* out) const {
  double p = p0;
  std::size_t next = 0;
  for (std::size_t s = 0; s < steps_.size(); ++s) {
    if (out) {
      while (next < output_after_.size() && output_after_[next] == s) out[next++] = p;
    }
    const Step& st = steps_[s];
    p = rk4_step(rhs, p, st.h, st.start, st.mid, st.end);
    if (!std::isfinite(p)) throw IntegrationError(st.t + st.h);
  }
  return p;
}

PeriodicSolver::Start PeriodicSolver::periodic_start(const LinearRhs& rhs) const {
  double p0 = 0.0;
  if (options_.initial_pressure) {
    p0 = *options_.initial_pressure;
  } else {
    // The discrete cycle map of a linear ODE is affine, p -> gain * p + offset;
    // its fixed point is the periodic orbit.
    const double offset = run_cycle(rhs, 0.0, nullptr);
    double gain = 1.0;
    for (const Step& st : steps_) gain *= rk4_gain(st.h * rhs.decay);
    if (!(std::abs(gain) < 1.0)) throw IntegrationError(inflow_.period());
    p0 = offset / (1.0 - gain);
  }

  bool converged = false;
  if (options_.n_warmup_cycles > 0) {
    const std::size_t cap = std::max(options_.n_warmup_cycles, options_.max_warmup_cycles);
    for (std::size_t cycle = 1; cycle <= cap; ++cycle) {
      const double p1 = run_cycle(rhs, p0, nullptr);
      // Two trajectories of a contractive linear ODE differ most at the cycle
      // start, so comparing cycle-start values bounds the whole-cycle difference.
      const double diff = std::abs(p1 - p0);
      p0 = p1;
      if (cycle >= options_.n_warmup_cycles && diff < options_.convergence_tol) {
        converged = true;
        break;
      }
    }
  }
  return {p0, converged};
}

PeriodicSolver::Result PeriodicSolver::solve(const LinearRhs& rhs) const {
  const Start start = periodic_start(rhs);
  Result result;
  result.values.resize(phases_.size());
  run_cycle(rhs, start.pressure, result.values.data());
  result.converged = start.converged;
  return result;
}

// ---------------------------------------------------------------------------
// Free functions

namespace {

PressureSeries simulate_linear(const InflowWaveform& inflow, const LinearRhs& rhs,
                               std::span<const double> grid, const SolverOptions& options) {
  require(!grid.empty(), "simulation grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require(std::isfinite(grid[i]) && grid[i] >= 0.0, "simulation grid times must be finite and >= 0");
    if (i > 0) require(grid[i] > grid[i - 1], "simulation grid must be strictly increasing");
  }

  const PeriodicSolver cycle(inflow, {}, options);
  const PeriodicSolver::Start start = cycle.periodic_start(rhs);

  const double period = inflow.period();
  const double t_end = grid.back();
  std::vector<double> knots(grid.begin(), grid.end());
  knots.push_back(0.0);
  const auto n_cycles = static_cast<std::size_t>(std::floor(t_end / period)) + 1;
  for (std::size_t c = 0; c <= n_cycles; ++c) {
    for (double b : inflow.breakpoints()) {
      const double t = static_cast<double>(c) * period + b;
      if (t < t_end) knots.push_back(t);
    }
  }
  sort_and_merge(knots);

  PressureSeries out;
  out.grid.assign(grid.begin(), grid.end());
  out.values.resize(grid.size());
  out.converged = start.converged;

  double p = start.pressure;
  std::size_t next = 0;
  for (std::size_t k = 0; k < knots.size(); ++k) {
    while (next < grid.size() && grid[next] <= knots[k] + kKnotMerge) out.values[next++] = p;
    if (k + 1 == knots.size()) break;
    const double a = knots[k];
    const double b = knots[k + 1];
    const double mid = 0.5 * (a + b);
    const double cycle_start = std::floor(mid / period) * period;
    const std::size_t piece = inflow.piece_of(inflow.phase_of(mid));
    const std::size_t n = substeps(b - a, options.max_step);
    const double h = (b - a) / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double ts = a + static_cast<double>(j) * h;
      const double te = j + 1 == n ? b : a + static_cast<double>(j + 1) * h;
      p = rk4_step(rhs, p, te - ts, inflow.on_piece(ts - cycle_start, piece),
                   inflow.on_piece(0.5 * (ts + te) - cycle_start, piece),
                   inflow.on_piece(te - cycle_start, piece));
      if (!std::isfinite(p)) throw IntegrationError(te);
    }
  }
  return out;
}

}  // namespace

PressureSeries simulate_wk2(const InflowWaveform& inflow, const Wk2Params& params,
                            std::span<const double> grid, const SolverOptions& options) {
  return simulate_linear(inflow, LinearRhs::of(params), grid, options);
}

PressureSeries simulate_wk3(const InflowWaveform& inflow, const Wk3Params& params,
                            std::span<const double> grid, const SolverOptions& options) {
  return simulate_linear(inflow, LinearRhs::of(params), grid, options);
}

PressureSeries simulate(const InflowWaveform& inflow, const WkParams& params,
                        std::span<const double> grid, const SolverOptions& options) {
  return simulate_linear(inflow, LinearRhs::of(params), grid, options);
}

double diastolic_decay(double p0, double R, double C, double dt) {
  require(R > 0.0 && C > 0.0, "diastolic_decay requires R, C > 0");
  require(dt >= 0.0, "diastolic_decay requires dt >= 0");
  return p0 * std::exp(-dt / (R * C));
}

double mean_ratio_resistance(const PressureSeries& series, std::span<const double> flow) {
  require(series.grid.size() == series.values.size() && series.grid.size() == flow.size(),
          "pressure, flow and grid lengths differ");
  require(series.grid.size() >= 2, "mean ratio needs at least two samples");
  require(series.converged, "mean ratio needs a converged periodic cycle");

  double p_area = 0.0;
  double q_area = 0.0;
  for (std::size_t i = 1; i < series.grid.size(); ++i) {
    const double dt = series.grid[i] - series.grid[i - 1];
    p_area += 0.5 * (series.values[i] + series.values[i - 1]) * dt;
    q_area += 0.5 * (flow[i] + flow[i - 1]) * dt;
  }
  if (!(std::isfinite(q_area) && q_area > 0.0)) {
    throw DegenerateInputError("mean flow is not positive; resistance undefined");
  }
  return p_area / q_area;
}

}  // namespace wkcal
