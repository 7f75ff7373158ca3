#include "wkcal/koh/products.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "wkcal/errors.hpp"
#include "wkcal/numerics/parallel.hpp"
#include "wkcal/numerics/rng.hpp"
#include "wkcal/numerics/stats.hpp"

namespace wkcal::koh {

std::string_view to_string(BandKind kind) noexcept {
  switch (kind) {
    case BandKind::bias_corrected:
      return "bias_corrected";
    case BandKind::pure_model:
      return "pure_model";
    case BandKind::bias:
      return "bias";
  }
  return "unknown";
}

double PredictionBand::average_width() const {
  if (time.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < time.size(); ++i) s += upper[i] - lower[i];
  return s / static_cast<double>(time.size());
}

namespace {

struct DrawPrediction {
  Eigen::VectorXd pure_mean, pure_sample;
  Eigen::VectorXd bias_mean, bias_sample;
  Eigen::VectorXd corrected_sample;
};

PredictionBand assemble(BandKind kind, const std::vector<double>& time, const Eigen::VectorXd& mean,
                        const std::vector<const Eigen::VectorXd*>& samples) {
  PredictionBand b;
  b.kind = kind;
  b.time = time;
  const auto m = static_cast<std::size_t>(mean.size());
  b.mean.assign(mean.data(), mean.data() + m);
  b.lower.resize(m);
  b.upper.resize(m);
  std::vector<double> column(samples.size());
  for (std::size_t g = 0; g < m; ++g) {
    for (std::size_t d = 0; d < samples.size(); ++d) column[d] = (*samples[d])[static_cast<Eigen::Index>(g)];
    std::sort(column.begin(), column.end());
    b.lower[g] = std::min(numerics::quantile_sorted(column, 0.05), b.mean[g]);
    b.upper[g] = std::max(numerics::quantile_sorted(column, 0.95), b.mean[g]);
  }
  return b;
}

}  // namespace

Products predict_products(const PosteriorSamples& samples, const TrainedEmulator& emulator, const BiasModel& bias,
                          const FieldInputs& field, const Eigen::MatrixXd& grid, const ProductsOptions& options) {
  if (samples.draws.empty()) throw std::invalid_argument("no posterior draws to predict from");
  if (grid.cols() != 2 || grid.rows() < 1) throw std::invalid_argument("prediction grid must have (I, t) rows");

  const auto field_targets = emulator.gp.prepare(field.x);
  const auto grid_targets = emulator.gp.prepare(grid);
  const Eigen::MatrixXd k_ff = bias.correlation(field.x, field.x);
  const Eigen::MatrixXd k_gf = bias.correlation(grid, field.x);
  const auto m = grid.rows();

  const std::size_t n_draws = samples.draws.size();
  std::vector<std::optional<DrawPrediction>> per_draw(n_draws);
  numerics::parallel_for(n_draws, [&](std::size_t i) {
    const auto& d = samples.draws[i];
    const auto at_field = emulator.predict(field_targets, d.R, d.C, !options.mean_only);
    const auto at_grid = emulator.predict(grid_targets, d.R, d.C, !options.mean_only);

    Eigen::MatrixXd cov = k_ff / d.lambda_b;
    if (!options.mean_only) cov += at_field.covariance;
    cov.diagonal().array() += 1.0 / d.lambda_f;
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) return;

    const Eigen::MatrixXd cross = k_gf / d.lambda_b;  // Cov(b(grid), y)
    const Eigen::VectorXd bias_mean = cross * llt.solve(field.y - at_field.mean);
    const Eigen::MatrixXd v = llt.matrixL().solve(cross.transpose());
    const Eigen::VectorXd bias_var = (1.0 / d.lambda_b - v.colwise().squaredNorm().array()).max(0.0);
    if (!bias_mean.allFinite()) return;

    numerics::CounterRng rng(numerics::derive_key(options.seed, i));
    DrawPrediction p;
    p.pure_mean = at_grid.mean;
    p.pure_sample.resize(m);
    p.bias_sample.resize(m);
    p.corrected_sample.resize(m);
    const double noise_sd = 1.0 / std::sqrt(d.lambda_f);
    for (Eigen::Index g = 0; g < m; ++g) {
      const double em_sd = options.mean_only ? 0.0 : std::sqrt(std::max(0.0, at_grid.covariance(g, g)));
      p.pure_sample[g] = at_grid.mean[g] + em_sd * rng.normal();
      p.bias_sample[g] = bias_mean[g] + std::sqrt(bias_var[g]) * rng.normal();
      p.corrected_sample[g] = p.pure_sample[g] + p.bias_sample[g] + noise_sd * rng.normal();
    }
    p.bias_mean = bias_mean;
    per_draw[i] = std::move(p);
  });

  Products out;
  Eigen::VectorXd pure_mean = Eigen::VectorXd::Zero(m), bias_mean = Eigen::VectorXd::Zero(m);
  std::vector<const Eigen::VectorXd*> pure, bias_s, corrected;
  for (const auto& p : per_draw) {
    if (!p) {
      ++out.skipped;
      continue;
    }
    pure_mean += p->pure_mean;
    bias_mean += p->bias_mean;
    pure.push_back(&p->pure_sample);
    bias_s.push_back(&p->bias_sample);
    corrected.push_back(&p->corrected_sample);
  }
  if (static_cast<double>(out.skipped) > options.max_skip_fraction * static_cast<double>(n_draws)) {
    throw ConditioningError(std::to_string(out.skipped) + " of " + std::to_string(n_draws) +
                            " posterior draws could not be conditioned");
  }
  const double kept = static_cast<double>(pure.size());
  pure_mean /= kept;
  bias_mean /= kept;

  std::vector<double> time(static_cast<std::size_t>(m));
  for (Eigen::Index g = 0; g < m; ++g) time[static_cast<std::size_t>(g)] = grid(g, 1);
  out.pure_model = assemble(BandKind::pure_model, time, pure_mean, pure);
  out.bias = assemble(BandKind::bias, time, bias_mean, bias_s);
  out.bias_corrected = assemble(BandKind::bias_corrected, time, pure_mean + bias_mean, corrected);
  return out;
}

}  // namespace wkcal::koh
