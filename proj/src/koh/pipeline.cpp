#include "wkcal/koh/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <string>
#include <utility>

#include "wkcal/errors.hpp"
#include "wkcal/nls_optim.hpp"

namespace wkcal::koh {

namespace {

template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

std::string_view to_string(InitialGuess guess) noexcept {
  switch (guess) {
    case InitialGuess::wk2_fit:
      return "wk2_fit";
    case InitialGuess::box_center:
      return "box_center";
    case InitialGuess::fixed:
      return "fixed";
  }
  return "unknown";
}

InitialGuess parse_initial_guess(std::string_view text) {
  if (text == "wk2_fit") return InitialGuess::wk2_fit;
  if (text == "box_center") return InitialGuess::box_center;
  if (text == "fixed") return InitialGuess::fixed;
  throw std::invalid_argument("unknown initial guess '" + std::string(text) + "'");
}

std::pair<double, double> initial_guess(const FieldData& data, const InflowWaveform& inflow,
                                        const CalibrationConfig& config) {
  const auto& box = config.emulator.box;
  switch (config.initial_guess) {
    case InitialGuess::box_center:
      return {0.5 * (box.lo + box.hi), 0.5 * (box.lo + box.hi)};
    case InitialGuess::fixed:
      return {config.R0, config.C0};
    case InitialGuess::wk2_fit: {
      FitOptions opts;
      opts.solver = config.emulator.solver;
      const auto fitted = fit(ModelKind::wk2, data, inflow, opts);
      return {std::clamp(total_resistance(fitted.params), box.lo, box.hi),
              std::clamp(compliance(fitted.params), box.lo, box.hi)};
    }
  }
  throw std::invalid_argument("unknown initial guess");
}

Eigen::MatrixXd regular_grid(const InflowWaveform& inflow, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("grid step must be positive");
  const double period = inflow.period();
  const auto n = static_cast<Eigen::Index>(std::floor(period / step + 1e-9));
  if (n < 2) throw std::invalid_argument("grid step leaves fewer than two points per cycle");
  Eigen::MatrixXd grid(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * step;
    grid(i, 0) = inflow.at(t).flow;
    grid(i, 1) = t;
  }
  return grid;
}

CalibrationResult calibrate(const FieldData& data, const InflowWaveform& inflow, const CalibrationConfig& config) {
  FieldInputs field = stage("field", [&] { return make_field_inputs(data); });
  TrainedEmulator emulator = stage("stage1", [&] {
    return stage1_train_emulator(build_design(field, inflow, config.emulator), config.emulator.mle);
  });
  BiasModel bias = stage("stage2", [&] {
    const auto [R0, C0] = initial_guess(data, inflow, config);
    return stage2_init_bias(emulator, field, R0, C0, config.bias_mle);
  });
  const auto priors = stage("stage2", [&] {
    return CalibrationPriors::from_estimates(bias, config.prior_multiple, config.emulator.box);
  });
  PosteriorSamples samples = stage("mcmc", [&] { return run_mcmc(emulator, bias, priors, field, config.mcmc); });
  PosteriorSummary summary = stage("summary", [&] { return summarize(samples, config.min_summary_draws); });
  Products products = stage("products", [&] {
    const Eigen::MatrixXd grid = config.grid_step > 0.0 ? regular_grid(inflow, config.grid_step) : field.phase_inputs();
    ProductsOptions opts = config.products;
    opts.mean_only = opts.mean_only || config.mcmc.mean_only;
    return predict_products(samples, emulator, bias, field, grid, opts);
  });
  return {std::move(field), std::move(emulator), std::move(bias), priors, std::move(samples), std::move(summary),
          std::move(products)};
}

}  // namespace wkcal::koh
