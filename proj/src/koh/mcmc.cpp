#include "wkcal/koh/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "wkcal/numerics/parallel.hpp"
#include "wkcal/numerics/rng.hpp"
#include "wkcal/numerics/sampling.hpp"

namespace wkcal::koh {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_exponential(double x, double mean) { return -std::log(mean) - x / mean; }

}  // namespace

CalibrationPriors CalibrationPriors::from_estimates(const BiasModel& bias, double multiple, CalibrationBox box) {
  if (!(multiple > 0.0)) throw std::invalid_argument("prior multiple must be positive");
  CalibrationPriors p;
  p.box = box;
  p.lambda_b_mean = multiple * bias.lambda_b_hat;
  p.lambda_f_mean = multiple * bias.lambda_f_hat;
  return p;
}

double CalibrationPriors::log_density(double R, double C, double lambda_b, double lambda_f) const noexcept {
  if (!box.contains(R, C) || !(lambda_b > 0.0) || !(lambda_f > 0.0)) return kNegInf;
  const double width = box.hi - box.lo;
  return -2.0 * std::log(width) + log_exponential(lambda_b, lambda_b_mean) + log_exponential(lambda_f, lambda_f_mean);
}

LogPosterior::LogPosterior(const TrainedEmulator& emulator, const BiasModel& bias, const CalibrationPriors& priors,
                           const FieldInputs& field, bool prior_only, bool mean_only)
    : emulator_(emulator),
      priors_(priors),
      y_(field.y),
      targets_(emulator.gp.prepare(field.x)),
      bias_gram_(bias.correlation(field.x, field.x)),
      prior_only_(prior_only),
      mean_only_(mean_only) {}

std::optional<double> LogPosterior::log_likelihood(double R, double C, double lambda_b, double lambda_f) const {
  const auto pred = emulator_.predict(targets_, R, C, !mean_only_);
  Eigen::MatrixXd cov = bias_gram_ / lambda_b;
  if (!mean_only_) cov += pred.covariance;
  cov.diagonal().array() += 1.0 / lambda_f;
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Eigen::VectorXd diag = llt.matrixL().toDenseMatrix().diagonal();
  if (!diag.allFinite() || (diag.array() <= 0.0).any()) return std::nullopt;
  const Eigen::VectorXd z = llt.matrixL().solve(y_ - pred.mean);
  const double n = static_cast<double>(y_.size());
  return -0.5 * z.squaredNorm() - diag.array().log().sum() - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

LogPosterior::Value LogPosterior::operator()(const Eigen::Vector4d& theta) const {
  const double lb = std::exp(theta[2]), lf = std::exp(theta[3]);
  const double prior = priors_.log_density(theta[0], theta[1], lb, lf);
  if (!std::isfinite(prior)) return {kNegInf, false};
  const double jacobian = theta[2] + theta[3];
  if (prior_only_) return {prior + jacobian, false};
  const auto ll = log_likelihood(theta[0], theta[1], lb, lf);
  if (!ll) return {kNegInf, true};
  if (!std::isfinite(*ll)) return {kNegInf, false};
  return {prior + jacobian + *ll, false};
}

std::vector<double> PosteriorSamples::column(double Draw::*field) const {
  std::vector<double> out;
  out.reserve(draws.size());
  for (const auto& d : draws) out.push_back(d.*field);
  return out;
}

std::vector<std::vector<double>> PosteriorSamples::by_chain(double Draw::*field) const {
  std::vector<std::vector<double>> out(chains);
  for (const auto& d : draws) out[static_cast<std::size_t>(d.chain)].push_back(d.*field);
  return out;
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    if (h < 2) throw std::invalid_argument("split-R-hat needs at least 4 draws per chain");
    halves.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(h));
    halves.emplace_back(c.end() - static_cast<std::ptrdiff_t>(h), c.end());
  }
  const std::size_t n = std::min_element(halves.begin(), halves.end(), [](const auto& a, const auto& b) {
                          return a.size() < b.size();
                        })->size();
  const double m = static_cast<double>(halves.size());
  std::vector<double> means, vars;
  for (const auto& h : halves) {
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += h[i];
    mu /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (h[i] - mu) * (h[i] - mu);
    means.push_back(mu);
    vars.push_back(ss / static_cast<double>(n - 1));
  }
  double grand = 0.0;
  for (double mu : means) grand += mu;
  grand /= m;
  double b = 0.0, w = 0.0;
  for (std::size_t j = 0; j < means.size(); ++j) {
    b += (means[j] - grand) * (means[j] - grand);
    w += vars[j];
  }
  const double nn = static_cast<double>(n);
  b *= nn / (m - 1.0);
  w /= m;
  if (w == 0.0) return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (nn - 1.0) / nn * w + b / nn;
  return std::sqrt(var_plus / w);
}

namespace {

struct ChainOutput {
  std::vector<Draw> draws;
  double acceptance = 0.0;
  std::size_t conditioning = 0;
};

// Empirical covariance of history rows [from, to).
Eigen::Matrix4d history_covariance(const std::vector<Eigen::Vector4d>& h, std::size_t from, std::size_t to) {
  Eigen::Vector4d mu = Eigen::Vector4d::Zero();
  for (std::size_t i = from; i < to; ++i) mu += h[i];
  mu /= static_cast<double>(to - from);
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
  for (std::size_t i = from; i < to; ++i) cov += (h[i] - mu) * (h[i] - mu).transpose();
  return cov / static_cast<double>(to - from - 1);
}

ChainOutput run_chain(const LogPosterior& target, const McmcConfig& cfg, std::size_t chain, std::size_t burn,
                      std::size_t thin, const Eigen::Vector4d& start) {
  numerics::CounterRng rng(numerics::derive_key(cfg.seed, chain));
  Eigen::Vector4d theta = start;
  auto current = target(theta);
  if (!std::isfinite(current.log_posterior)) throw std::runtime_error("chain start has zero posterior density");

  const Eigen::Vector4d initial_sd(0.1, 0.1, 0.5, 0.5);
  Eigen::Matrix4d chol = initial_sd.asDiagonal();
  double log_scale = 0.0;
  std::vector<Eigen::Vector4d> history;
  history.reserve(burn);
  std::size_t next_refresh = 1000;
  std::size_t batch_accepts = 0, batch_size = 0, batches = 0;

  ChainOutput out;
  std::size_t accepted_post = 0;
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    Eigen::Vector4d z;
    for (int j = 0; j < 4; ++j) z[j] = rng.normal();
    const Eigen::Vector4d proposal = theta + std::exp(log_scale) * (chol * z);
    const auto next = target(proposal);
    if (next.conditioning_failed) ++out.conditioning;
    const double log_u = std::log(rng.uniform_positive());
    const bool accept = std::isfinite(next.log_posterior) && log_u < next.log_posterior - current.log_posterior;
    if (accept) {
      theta = proposal;
      current = next;
    }

    if (t < burn) {
      history.push_back(theta);
      batch_accepts += accept;
      if (++batch_size == 100) {
        ++batches;
        const double rate = static_cast<double>(batch_accepts) / 100.0;
        const double step = std::min(0.5, 1.0 / std::sqrt(static_cast<double>(batches)));
        log_scale += rate > cfg.target_acceptance ? step : -step;
        batch_accepts = batch_size = 0;
      }
      if (t + 1 == next_refresh && t + 1 < burn) {
        const Eigen::Matrix4d cov = history_covariance(history, history.size() / 2, history.size());
        const Eigen::LLT<Eigen::Matrix4d> llt(cov + 1e-10 * Eigen::Matrix4d::Identity());
        if (llt.info() == Eigen::Success && cov.diagonal().minCoeff() > 0.0) {
          chol = llt.matrixL();
          log_scale = std::log(2.38 / 2.0);
        }
        next_refresh *= 2;
      }
    } else {
      accepted_post += accept;
      if ((t - burn + 1) % thin == 0) {
        out.draws.push_back({theta[0], theta[1], std::exp(theta[2]), std::exp(theta[3]), static_cast<int>(chain), t});
      }
    }
  }
  out.acceptance = static_cast<double>(accepted_post) / static_cast<double>(cfg.iterations - burn);
  return out;
}

}  // namespace

PosteriorSamples run_mcmc(const TrainedEmulator& emulator, const BiasModel& bias, const CalibrationPriors& priors,
                          const FieldInputs& field, const McmcConfig& config) {
  if (config.chains < 1) throw std::invalid_argument("need at least one chain");
  if (!(config.burn_in_fraction >= 0.0 && config.burn_in_fraction < 1.0)) {
    throw std::invalid_argument("burn-in fraction must lie in [0, 1)");
  }
  const auto burn = static_cast<std::size_t>(std::floor(config.burn_in_fraction * static_cast<double>(config.iterations)));
  const std::size_t post = config.iterations - burn;
  if (post < 4) throw std::invalid_argument("too few post-burn-in iterations");
  std::size_t thin = config.thin;
  if (thin == 0) thin = std::max<std::size_t>(1, config.chains * post / std::max<std::size_t>(1, config.target_draws));

  const LogPosterior target(emulator, bias, priors, field, config.prior_only, config.mean_only);

  // Dispersed starts: one stratum of the box per chain in each of R and C.
  const auto lhs = numerics::latin_hypercube(config.chains, 2, numerics::derive_key(config.seed, 0x57a7));
  const double lo = priors.box.lo, width = priors.box.hi - priors.box.lo;
  std::vector<ChainOutput> outputs(config.chains);
  numerics::parallel_for(config.chains, [&](std::size_t c) {
    numerics::CounterRng rng(numerics::derive_key(config.seed, 0x1000 + c));
    const auto i = static_cast<Eigen::Index>(c);
    Eigen::Vector4d start(lo + width * (0.1 + 0.8 * lhs(i, 0)), lo + width * (0.1 + 0.8 * lhs(i, 1)),
                          std::log(bias.lambda_b_hat) + 0.3 * rng.normal(), std::log(bias.lambda_f_hat) + 0.3 * rng.normal());
    outputs[c] = run_chain(target, config, c, burn, thin, start);
  });

  PosteriorSamples s;
  s.chains = config.chains;
  s.iterations = config.iterations;
  s.burn_in = burn;
  s.thin = thin;
  for (auto& o : outputs) {
    s.draws.insert(s.draws.end(), o.draws.begin(), o.draws.end());
    s.acceptance.push_back(o.acceptance);
    s.conditioning_rejections.push_back(o.conditioning);
  }
  const auto per_chain = s.by_chain(&Draw::R);
  if (!per_chain.empty() && per_chain.front().size() >= 4) {
    s.rhat_R = split_rhat(per_chain);
    s.rhat_C = split_rhat(s.by_chain(&Draw::C));
  }
  return s;
}

}  // namespace wkcal::koh
