#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>

#include "wkcal/errors.hpp"
#include "wkcal/koh/pipeline.hpp"
#include "wkcal/numerics/rng.hpp"

using namespace wkcal;
using namespace wkcal::koh;

namespace {

// One cycle of the default half-sine grid (0.05 s spacing) with a WK2 pressure curve.
struct CycleGrid {
  std::vector<double> t, flow, pressure;
};

CycleGrid half_sine_cycle() {
  const auto inflow = InflowWaveform::half_sine();
  const PeriodicSolver solver(inflow, [] {
    std::vector<double> p;
    for (int i = 0; i < 17; ++i) p.push_back(0.05 * i);
    return p;
  }());
  CycleGrid g;
  for (int i = 0; i < 17; ++i) {
    g.t.push_back(0.05 * i);
    g.flow.push_back(inflow.at(0.05 * i).flow);
  }
  g.pressure = solver.solve(Wk2Params{1.0, 1.0}).values;
  return g;
}

double ks_uniform(std::vector<double> x, double lo, double hi) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = (x[i] - lo) / (hi - lo);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

// A small emulator shared by the tests below: 100 design points, 12 field points.
struct Shared {
  SetupSpec spec = standard_setup(1, 1);
  FieldData data = generate_dataset(spec);
  FieldInputs field = make_field_inputs(data);
  EmulatorOptions options = [] {
    EmulatorOptions o;
    o.design_size = 125;
    return o;
  }();
  EmulatorDesign full = build_design(field, spec.inflow, options);
  EmulatorDesign train = [this] {
    EmulatorDesign d = full;
    d.calibration = full.calibration.topRows(100);
    d.runs = full.runs.topRows(100);
    return d;
  }();
  TrainedEmulator emulator = stage1_train_emulator(train, options.mle);
};

const Shared& shared() {
  static const auto s = std::make_unique<Shared>();
  return *s;
}

PosteriorSamples short_run(const TrainedEmulator& em, const BiasModel& bias, const FieldInputs& field,
                           bool prior_only, std::size_t iterations = 6000) {
  McmcConfig cfg;
  cfg.iterations = iterations;
  cfg.prior_only = prior_only;
  cfg.target_draws = 2000;
  return run_mcmc(em, bias, CalibrationPriors::from_estimates(bias), field, cfg);
}

}  // namespace

TEST(InfluentialPoints, FullSizeIsIdentity) {
  const auto g = half_sine_cycle();
  const auto p = select_influential_points(g.t, g.flow, g.pressure, g.t.size());
  std::vector<std::size_t> all(g.t.size());
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(p.indices, all);
}

TEST(InfluentialPoints, HalfSineKeepsLandmarks) {
  const auto g = half_sine_cycle();
  const auto p = select_influential_points(g.t, g.flow, g.pressure, 8);
  ASSERT_EQ(p.indices.size(), 8u);
  EXPECT_TRUE(std::is_sorted(p.indices.begin(), p.indices.end()));
  EXPECT_EQ(std::adjacent_find(p.indices.begin(), p.indices.end()), p.indices.end());
  auto has_time_near = [&](double t, double tol) {
    return std::any_of(p.times.begin(), p.times.end(), [&](double s) { return std::abs(s - t) <= tol + 1e-12; });
  };
  EXPECT_TRUE(has_time_near(0.0, 0.0));
  EXPECT_TRUE(has_time_near(0.15, 0.1));   // pressure peak trails peak flow
  EXPECT_TRUE(has_time_near(0.3, 0.0));    // inflow end
  EXPECT_TRUE(has_time_near(0.8, 0.0));    // last sample before the next cycle
  for (std::size_t j = 0; j < p.indices.size(); ++j) {
    EXPECT_EQ(p.times[j], g.t[p.indices[j]]);
    EXPECT_EQ(p.pressures[j], g.pressure[p.indices[j]]);
  }
}

TEST(InfluentialPoints, MonotoneDecayKeepsEndpoints) {
  std::vector<double> t, flow(20, 0.0), p;
  for (int i = 0; i < 20; ++i) {
    t.push_back(0.05 * i);
    p.push_back(100.0 * std::exp(-t.back()));
  }
  const auto sel = select_influential_points(t, flow, p, 5);
  ASSERT_EQ(sel.indices.size(), 5u);
  EXPECT_EQ(sel.indices.front(), 0u);
  EXPECT_EQ(sel.indices.back(), 19u);
}

TEST(InfluentialPoints, RejectsBadCounts) {
  const auto g = half_sine_cycle();
  EXPECT_THROW(select_influential_points(g.t, g.flow, g.pressure, 4), std::invalid_argument);
  EXPECT_THROW(select_influential_points(g.t, g.flow, g.pressure, g.t.size() + 1), std::invalid_argument);
}

TEST(Emulator, DesignStaysInBoxAndRunsAreFinite) {
  const auto& d = shared().full;
  EXPECT_EQ(d.calibration.rows(), 125);
  EXPECT_EQ(d.field_inputs.rows(), 12);
  EXPECT_GE(d.calibration.minCoeff(), 0.5);
  EXPECT_LE(d.calibration.maxCoeff(), 3.0);
  EXPECT_TRUE(d.runs.allFinite());
}

TEST(Emulator, RejectsTooSmallDesign) {
  auto d = shared().train;
  d.calibration = d.calibration.topRows(3);
  d.runs = d.runs.topRows(3);
  EXPECT_THROW(stage1_train_emulator(d, shared().options.mle), std::invalid_argument);
}

TEST(Emulator, InterpolatesTrainingRuns) {
  const auto& s = shared();
  const auto targets = s.emulator.gp.prepare(s.train.field_inputs);
  double worst = 0.0;
  for (Eigen::Index p = 0; p < s.train.calibration.rows(); ++p) {
    const auto pred = s.emulator.predict(targets, s.train.calibration(p, 0), s.train.calibration(p, 1), false);
    worst = std::max(worst, (pred.mean - s.train.runs.row(p).transpose()).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 0.1);
}

TEST(Emulator, HeldOutRunsWithinTwoMmHg) {
  const auto& s = shared();
  const auto targets = s.emulator.gp.prepare(s.full.field_inputs);
  double se = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index p = 100; p < s.full.calibration.rows(); ++p) {
    const auto pred = s.emulator.predict(targets, s.full.calibration(p, 0), s.full.calibration(p, 1), false);
    se += (pred.mean - s.full.runs.row(p).transpose()).squaredNorm();
    count += pred.mean.size();
  }
  EXPECT_LT(std::sqrt(se / static_cast<double>(count)), 2.0);
}

TEST(Emulator, BoxCornerPredictionIsBounded) {
  const auto& s = shared();
  const auto targets = s.emulator.gp.prepare(s.field.phase_inputs());
  for (double R : {0.5, 3.0}) {
    for (double C : {0.5, 3.0}) {
      const auto pred = s.emulator.predict(targets, R, C);
      EXPECT_TRUE(pred.mean.allFinite());
      EXPECT_LE(pred.covariance.diagonal().maxCoeff(), s.emulator.gp.kernel().variance * (1.0 + 1e-12));
      EXPECT_GE(pred.covariance.diagonal().minCoeff(), 0.0);
    }
  }
}

TEST(Stage2, NoiselessWk2DataAtGuessLeavesTinyResiduals) {
  const auto& s = shared();
  SetupSpec perfect = s.spec;
  perfect.truth = Wk2Params{1.2, 1.1};
  const auto field = make_field_inputs(noiseless_dataset(perfect));
  const auto bias = stage2_init_bias(s.emulator, field, 1.2, 1.1);
  // Only emulator error remains, which the held-out check bounds at 2 mmHg.
  EXPECT_LT(bias.residuals.cwiseAbs().maxCoeff(), 2.0);
  EXPECT_GT(bias.lambda_f_hat, 1e4);
}

TEST(Stage2, Setup1ResidualsAwayFromTruthAreStructured) {
  const auto& s = shared();
  const auto bias = stage2_init_bias(s.emulator, s.field, 1.5, 1.5);
  EXPECT_GT(bias.residuals.cwiseAbs().maxCoeff(), 10.0);
  EXPECT_TRUE(std::isfinite(bias.lambda_b_hat));
  EXPECT_GT(bias.lambda_b_hat, 0.0);
  EXPECT_DOUBLE_EQ(bias.R0, 1.5);
}

TEST(Stage2, ShuffledNoiseGivesNoisePrecisionNearTruth) {
  const auto& s = shared();
  numerics::CounterRng rng(0x5b);
  Eigen::VectorXd noise(s.field.size());
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise[i] = 4.0 * rng.normal();
  const auto bias = fit_bias(s.field.x, noise, {gp::ExponentMode::fixed_2, 4, 0xb1a5, false, {1e-5, 3000, 1}});
  EXPECT_GT(bias.lambda_f_hat, 1.0 / 32.0);
  EXPECT_LT(bias.lambda_f_hat, 1.0 / 8.0);
}

TEST(Stage2, GuessOutsideBoxIsRejected) {
  EXPECT_THROW(stage2_init_bias(shared().emulator, shared().field, 0.2, 1.0), std::invalid_argument);
}

TEST(Priors, ExponentialMeansAndSupport) {
  BiasModel b;
  b.lambda_b_hat = 0.01;
  b.lambda_f_hat = 0.06;
  const auto p = CalibrationPriors::from_estimates(b);
  EXPECT_DOUBLE_EQ(p.lambda_b_mean, 0.05);
  EXPECT_DOUBLE_EQ(p.lambda_f_mean, 0.3);
  EXPECT_TRUE(std::isinf(p.log_density(0.4, 1.0, 1.0, 1.0)));
  EXPECT_TRUE(std::isinf(p.log_density(1.0, 1.0, 0.0, 1.0)));
  // Uniform in (R, C): density does not depend on them inside the box.
  EXPECT_DOUBLE_EQ(p.log_density(0.6, 2.9, 0.1, 0.2), p.log_density(2.0, 1.0, 0.1, 0.2));
  EXPECT_NEAR(p.log_density(1.0, 1.0, 0.1, 0.2) - p.log_density(1.0, 1.0, 0.2, 0.2), 0.1 / 0.05, 1e-12);
}

TEST(Mcmc, LogPosteriorFiniteInsideSupportOnly) {
  const auto& s = shared();
  const auto bias = stage2_init_bias(s.emulator, s.field, 1.75, 1.75);
  const LogPosterior lp(s.emulator, bias, CalibrationPriors::from_estimates(bias), s.field);
  numerics::CounterRng rng(3);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector4d theta(0.5 + 2.5 * rng.uniform(), 0.5 + 2.5 * rng.uniform(), -8.0 + 6.0 * rng.uniform(),
                                -5.0 + 4.0 * rng.uniform());
    const auto v = lp(theta);
    EXPECT_TRUE(std::isfinite(v.log_posterior) || v.conditioning_failed);
  }
  EXPECT_TRUE(std::isinf(lp(Eigen::Vector4d(3.2, 1.0, -5.0, -3.0)).log_posterior));
}

TEST(Mcmc, PriorOnlyRecoversUniformMarginals) {
  const auto& s = shared();
  const auto bias = stage2_init_bias(s.emulator, s.field, 1.75, 1.75);
  McmcConfig cfg;
  cfg.prior_only = true;
  const auto samples = run_mcmc(s.emulator, bias, CalibrationPriors::from_estimates(bias), s.field, cfg);
  ASSERT_GE(samples.draws.size(), 7000u);
  EXPECT_LT(ks_uniform(samples.column(&Draw::R), 0.5, 3.0), 0.05);
  EXPECT_LT(ks_uniform(samples.column(&Draw::C), 0.5, 3.0), 0.05);
}

TEST(Mcmc, DrawsStayInSupportAndThinningIsRecorded) {
  const auto& s = shared();
  const auto bias = stage2_init_bias(s.emulator, s.field, 1.2, 0.8);
  const auto samples = short_run(s.emulator, bias, s.field, false);
  EXPECT_EQ(samples.burn_in, 3000u);
  EXPECT_EQ(samples.thin, 6u);  // floor(4 * 3000 / 2000)
  EXPECT_EQ(samples.draws.size(), 4u * 500u);
  for (const auto& d : samples.draws) {
    ASSERT_TRUE(d.R >= 0.5 && d.R <= 3.0 && d.C >= 0.5 && d.C <= 3.0);
    ASSERT_TRUE(d.lambda_b > 0.0 && d.lambda_f > 0.0);
  }
  for (double a : samples.acceptance) {
    EXPECT_GT(a, 0.1);
    EXPECT_LT(a, 0.6);
  }
}

TEST(Mcmc, SameSeedReplays) {
  const auto& s = shared();
  const auto bias = stage2_init_bias(s.emulator, s.field, 1.2, 0.8);
  const auto a = short_run(s.emulator, bias, s.field, false, 2000);
  const auto b = short_run(s.emulator, bias, s.field, false, 2000);
  ASSERT_EQ(a.draws.size(), b.draws.size());
  for (std::size_t i = 0; i < a.draws.size(); ++i) {
    ASSERT_EQ(a.draws[i].R, b.draws[i].R);
    ASSERT_EQ(a.draws[i].lambda_f, b.draws[i].lambda_f);
  }
}

TEST(SplitRhat, AgreeingAndDisagreeingChains) {
  numerics::CounterRng rng(11);
  std::vector<std::vector<double>> same(4), shifted(4);
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < 2000; ++i) {
      const double z = rng.normal();
      same[static_cast<std::size_t>(c)].push_back(z);
      shifted[static_cast<std::size_t>(c)].push_back(z + 2.0 * c);
    }
  }
  EXPECT_LT(split_rhat(same), 1.01);
  EXPECT_GT(split_rhat(shifted), 1.5);
  EXPECT_THROW(split_rhat({{1.0, 2.0, 3.0}}), std::invalid_argument);
}

TEST(Summary, DegenerateDraws) {
  const std::vector<double> draws(2000, 1.1);
  const auto p = summarize_parameter("C", draws);
  EXPECT_DOUBLE_EQ(p.mean, 1.1);
  EXPECT_DOUBLE_EQ(p.map, 1.1);
  EXPECT_DOUBLE_EQ(p.lower, p.upper);
  EXPECT_FALSE(p.bimodal);
}

TEST(Summary, BalancedMixtureIsBimodal) {
  numerics::CounterRng rng(21);
  std::vector<double> draws;
  for (int i = 0; i < 7000; ++i) draws.push_back((i % 2 ? 1.386 : 1.149) + 0.03 * rng.normal());
  const auto p = summarize_parameter("C", draws);
  ASSERT_TRUE(p.bimodal);
  ASSERT_EQ(p.modes.size(), 2u);
  auto modes = p.modes;
  std::sort(modes.begin(), modes.end());
  EXPECT_NEAR(modes[0], 1.149, 0.02);
  EXPECT_NEAR(modes[1], 1.386, 0.02);
}

TEST(Summary, UniformQuantiles) {
  numerics::CounterRng rng(22);
  std::vector<double> draws;
  for (int i = 0; i < 7000; ++i) draws.push_back(0.5 + 2.5 * rng.uniform());
  const auto p = summarize_parameter("R", draws);
  EXPECT_NEAR(p.lower, 0.625, 0.04);
  EXPECT_NEAR(p.upper, 2.875, 0.04);
  EXPECT_NEAR(p.mean, 1.75, 0.03);
}

TEST(Summary, UnimodalGaussianMapNearCentre) {
  numerics::CounterRng rng(23);
  std::vector<double> draws;
  for (int i = 0; i < 5000; ++i) draws.push_back(0.8 + 0.05 * rng.normal());
  const auto p = summarize_parameter("C", draws);
  EXPECT_FALSE(p.bimodal);
  EXPECT_NEAR(p.map, 0.8, 0.01);
  ASSERT_EQ(p.modes.size(), 1u);
}

TEST(Summary, TooFewDrawsRejected) {
  const std::vector<double> draws(999, 1.0);
  EXPECT_THROW(summarize_parameter("R", draws), std::invalid_argument);
}

TEST(Summary, InvariantUnderPermutation) {
  numerics::CounterRng rng(24);
  std::vector<double> draws;
  for (int i = 0; i < 3000; ++i) draws.push_back(std::exp(0.3 * rng.normal()));
  auto shuffled = draws;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(5));
  const auto a = summarize_parameter("R", draws), b = summarize_parameter("R", shuffled);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.map, b.map);
  EXPECT_EQ(a.lower, b.lower);
  EXPECT_EQ(a.upper, b.upper);
}

TEST(Products, BandsOrderedAndAdditive) {
  const auto& s = shared();
  const auto bias = stage2_init_bias(s.emulator, s.field, 1.2, 0.8);
  const auto samples = short_run(s.emulator, bias, s.field, false);
  const auto grid = regular_grid(s.spec.inflow, 0.025);
  const auto products = predict_products(samples, s.emulator, bias, s.field, grid);
  EXPECT_EQ(products.skipped, 0u);
  for (const auto* band : {&products.pure_model, &products.bias, &products.bias_corrected}) {
    ASSERT_EQ(band->mean.size(), static_cast<std::size_t>(grid.rows()));
    for (std::size_t g = 0; g < band->mean.size(); ++g) {
      EXPECT_LE(band->lower[g], band->mean[g]);
      EXPECT_LE(band->mean[g], band->upper[g]);
    }
  }
  for (std::size_t g = 0; g < products.pure_model.mean.size(); ++g) {
    EXPECT_NEAR(products.bias_corrected.mean[g], products.pure_model.mean[g] + products.bias.mean[g], 1e-6);
  }
  EXPECT_DOUBLE_EQ(products.pure_model.time[1], 0.025);
}

TEST(Products, PerfectModelBiasBandContainsZero) {
  const auto& s = shared();
  SetupSpec perfect = s.spec;
  perfect.truth = Wk2Params{1.2, 1.1};
  const auto data = generate_dataset(perfect);
  const auto field = make_field_inputs(data);
  const auto bias = stage2_init_bias(s.emulator, field, 1.75, 1.75);
  const auto samples = short_run(s.emulator, bias, field, false);
  const auto products = predict_products(samples, s.emulator, bias, field, field.phase_inputs());
  const auto& b = products.bias;
  std::size_t covered = 0;
  for (std::size_t g = 0; g < b.mean.size(); ++g) covered += b.lower[g] <= 0.0 && 0.0 <= b.upper[g];
  EXPECT_GE(static_cast<double>(covered), 0.9 * static_cast<double>(b.mean.size()));
}

TEST(Pipeline, InitialGuessModes) {
  const auto& s = shared();
  CalibrationConfig cfg;
  cfg.initial_guess = InitialGuess::box_center;
  EXPECT_EQ(initial_guess(s.data, s.spec.inflow, cfg), std::make_pair(1.75, 1.75));
  cfg.initial_guess = InitialGuess::fixed;
  cfg.R0 = 1.0;
  cfg.C0 = 2.0;
  EXPECT_EQ(initial_guess(s.data, s.spec.inflow, cfg), std::make_pair(1.0, 2.0));
  cfg.initial_guess = InitialGuess::wk2_fit;
  const auto [R0, C0] = initial_guess(s.data, s.spec.inflow, cfg);
  EXPECT_NEAR(R0, total_resistance(s.spec.truth), 0.15);
  EXPECT_LT(C0, compliance(s.spec.truth));
  EXPECT_EQ(parse_initial_guess("box_center"), InitialGuess::box_center);
  EXPECT_THROW(parse_initial_guess("middle"), std::invalid_argument);
}

TEST(Pipeline, FailuresNameTheStage) {
  auto data = shared().data;
  for (auto& o : data.observations) o.pressure = std::nan("");
  try {
    calibrate(data, shared().spec.inflow);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "field");
  }
  CalibrationConfig cfg;
  cfg.initial_guess = InitialGuess::fixed;
  cfg.R0 = 9.0;
  cfg.emulator.design_size = 2;
  try {
    calibrate(shared().data, shared().spec.inflow, cfg);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "stage1");
  }
}
