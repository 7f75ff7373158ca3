#pragma once

// Least-squares point estimation of Windkessel parameters.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wkcal/numerics/nelder_mead.hpp"
#include "wkcal/synthetic.hpp"
#include "wkcal/wk_models.hpp"

namespace wkcal {

/// Parameter vector layout: WK2 (R, C); WK3 (R1, R2, C).
std::vector<double> to_vector(const WkParams& params);
WkParams from_vector(ModelKind kind, std::span<const double> x);
std::vector<std::string> parameter_names(ModelKind kind);

/// Default search box: [0.5, 3] for R, R2, C and [0, 0.5] for R1.
numerics::BoxBounds default_bounds(ModelKind kind);

/// Residual sum of squares against a fixed dataset. Observations are folded onto
/// their cycle phase, so one steady-state cycle solve serves every observation.
class RssObjective {
 public:
  RssObjective(ModelKind kind, const FieldData& data, const InflowWaveform& inflow,
               const SolverOptions& solver = {});

  double operator()(const WkParams& params) const;
  double operator()(std::span<const double> x) const;

  ModelKind kind() const noexcept { return kind_; }
  std::size_t n_observations() const noexcept { return phase_index_.size(); }

 private:
  ModelKind kind_;
  PeriodicSolver solver_;
  std::vector<std::size_t> phase_index_;
  std::vector<double> observed_;
};

double rss(const WkParams& params, const FieldData& data, const InflowWaveform& inflow,
           const SolverOptions& solver = {});

struct FitOptions {
  std::size_t n_starts = 8;
  std::uint64_t seed = 0x5eed;
  std::optional<numerics::BoxBounds> bounds;  // default_bounds() when unset
  numerics::NelderMeadOptions optimizer{};
  SolverOptions solver{};
};

struct StartDiagnostic {
  std::vector<double> start;
  std::vector<double> terminal;
  double start_rss = 0.0;
  double rss = 0.0;
  bool converged = false;
  std::string error;  // empty on success
};

struct FitResult {
  WkParams params;
  double rss = 0.0;
  std::size_t n_starts = 0;
  bool converged = false;
  std::size_t best_start_index = 0;
  std::vector<StartDiagnostic> starts;
};

/// Multi-start Nelder-Mead from a Latin hypercube of the box. Throws
/// OptimizationError when every start fails.
FitResult fit(ModelKind kind, const FieldData& data, const InflowWaveform& inflow,
              const FitOptions& options = {});

/// One fit per cycle, in cycle_id order.
std::vector<FitResult> fit_per_cycle(ModelKind kind, const FieldData& data,
                                     const InflowWaveform& inflow, const FitOptions& options = {});

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double lower = 0.0;  // empirical 5% quantile
  double upper = 0.0;  // empirical 95% quantile
};

struct ReplicateSummary {
  ModelKind model = ModelKind::wk2;
  std::size_t n_replicates = 0;
  std::size_t n_failed = 0;
  /// WK2: C, R. WK3: C, R (= R1 + R2), R1, R2.
  std::vector<ParameterSummary> parameters;
  std::vector<WkParams> estimates;

  const ParameterSummary& at(const std::string& name) const;
};

/// Fits `model` to replicate datasets seed..seed+n-1 of `setup`. Failed fits are
/// excluded; more than 10% failures raise OptimizationError.
ReplicateSummary replicate_study(const SetupSpec& setup, ModelKind model, std::size_t n = 100,
                                 const FitOptions& options = {});

}  // namespace wkcal
