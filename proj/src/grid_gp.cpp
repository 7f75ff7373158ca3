#include "wkcal/grid_gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "wkcal/errors.hpp"
#include "wkcal/numerics/nelder_mead.hpp"
#include "wkcal/numerics/parallel.hpp"
#include "wkcal/numerics/sampling.hpp"

namespace wkcal::gp {

namespace {

PowerExpKernel slice(const PowerExpKernel& k, Eigen::Index start, Eigen::Index n) {
  PowerExpKernel out;
  out.variance = 1.0;
  out.lengthscales = k.lengthscales.segment(start, n);
  out.exponents = k.exponents.segment(start, n);
  return out;
}

struct Eigen2 {
  Eigen::MatrixXd vectors;
  Eigen::VectorXd values;
};

Eigen2 eigen_of(const Eigen::MatrixXd& r) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(r);
  if (solver.info() != Eigen::Success) throw ConditioningError("eigendecomposition of a kernel factor failed");
  // Round-off can leave tiny negative eigenvalues of a PSD correlation matrix.
  return {solver.eigenvectors(), solver.eigenvalues().cwiseMax(0.0)};
}

double log_2pi() { return std::log(2.0 * std::numbers::pi); }

}  // namespace

GridGp::GridGp(Eigen::MatrixXd outer, Eigen::MatrixXd inner, Eigen::MatrixXd y, PowerExpKernel kernel,
               double noise_precision, bool center)
    : kernel_(std::move(kernel)), noise_precision_(noise_precision) {
  kernel_.validate();
  if (outer.rows() < 2 || inner.rows() < 1) throw std::invalid_argument("crossed design is too small");
  if (y.rows() != outer.rows() || y.cols() != inner.rows()) throw std::invalid_argument("output grid has the wrong shape");
  if (static_cast<Eigen::Index>(kernel_.dims()) != outer.cols() + inner.cols()) {
    throw std::invalid_argument("kernel/design dimension mismatch");
  }
  if (!(noise_precision > 0.0)) throw std::invalid_argument("noise precision must be positive");
  if (!y.allFinite() || !outer.allFinite() || !inner.allFinite()) throw std::invalid_argument("training data must be finite");

  inner_kernel_ = slice(kernel_, 0, inner.cols());
  outer_kernel_ = slice(kernel_, inner.cols(), outer.cols());
  outer_scaling_ = InputScaling::fit(outer);
  inner_scaling_ = InputScaling::fit(inner);
  outer_ = outer_scaling_.apply(outer);
  inner_ = inner_scaling_.apply(inner);
  offset_ = center ? y.mean() : 0.0;
  y.array() -= offset_;

  const auto ea = eigen_of(correlation(outer_kernel_, outer_, outer_));
  const auto eb = eigen_of(correlation(inner_kernel_, inner_, inner_));
  q_outer_ = ea.vectors;
  q_inner_ = eb.vectors;
  e_outer_ = ea.values;
  e_inner_ = eb.values;

  const double sigma2 = kernel_.variance;
  nugget_ = (std::isinf(noise_precision_) ? 0.0 : 1.0 / noise_precision_) + kJitterStart * sigma2;
  denom_ = (sigma2 * e_outer_ * e_inner_.transpose()).array() + nugget_;

  const Eigen::MatrixXd rotated = q_outer_.transpose() * y * q_inner_;
  const Eigen::MatrixXd scaled = rotated.cwiseQuotient(denom_);
  alpha_ = q_outer_ * scaled * q_inner_.transpose();
  const double n = static_cast<double>(y.size());
  log_likelihood_ = -0.5 * rotated.cwiseProduct(scaled).sum() - 0.5 * denom_.array().log().sum() - 0.5 * n * log_2pi();
}

GridGp::Targets GridGp::prepare(const Eigen::Ref<const Eigen::MatrixXd>& inner_targets) const {
  const Eigen::MatrixXd t = inner_scaling_.apply(inner_targets);
  Targets out;
  out.cross_ = correlation(inner_kernel_, inner_, t);
  out.rotated_ = q_inner_.transpose() * out.cross_;
  out.self_ = correlation(inner_kernel_, t, t);
  out.mean_weights_ = alpha_ * out.cross_;
  return out;
}

Eigen::RowVectorXd GridGp::outer_correlation(const Eigen::Ref<const Eigen::RowVectorXd>& scaled) const {
  return correlation(outer_kernel_, scaled, outer_);
}

GpModel::JointPrediction GridGp::predict(const Targets& targets, const Eigen::Ref<const Eigen::RowVectorXd>& outer_point,
                                         bool with_covariance) const {
  const Eigen::RowVectorXd ka = outer_correlation(outer_scaling_.apply(outer_point));
  const double sigma2 = kernel_.variance;
  GpModel::JointPrediction p;
  p.mean = (sigma2 * (ka * targets.mean_weights_)).transpose().array() + offset_;
  if (with_covariance) {
    const Eigen::VectorXd u2 = (q_outer_.transpose() * ka.transpose()).array().square();
    // w_q = sum_p u_p^2 / denom(p, q)
    const Eigen::VectorXd w = denom_.cwiseInverse().transpose() * u2;
    const Eigen::MatrixXd weighted = w.asDiagonal() * targets.rotated_;
    p.covariance = sigma2 * targets.self_ - (sigma2 * sigma2) * (targets.rotated_.transpose() * weighted);
  }
  return p;
}

GpModel::Prediction GridGp::predict_rows(const Eigen::Ref<const Eigen::MatrixXd>& rows) const {
  const Eigen::Index r = inner_.cols(), q = outer_.cols();
  if (rows.cols() != r + q) throw std::invalid_argument("prediction rows have the wrong number of columns");
  const Eigen::MatrixXd inner = inner_scaling_.apply(rows.leftCols(r));
  const Eigen::MatrixXd outer = outer_scaling_.apply(rows.rightCols(q));
  const Eigen::MatrixXd kb = correlation(inner_kernel_, inner_, inner);  // k x m
  const Eigen::MatrixXd ka = correlation(outer_kernel_, outer_, outer);  // N x m
  const double sigma2 = kernel_.variance;
  const Eigen::MatrixXd u = q_outer_.transpose() * ka;
  const Eigen::MatrixXd v = q_inner_.transpose() * kb;
  const Eigen::MatrixXd inv = denom_.cwiseInverse();

  GpModel::Prediction p;
  p.mean.resize(rows.rows());
  p.variance.resize(rows.rows());
  const Eigen::MatrixXd ak = alpha_ * kb;  // N x m
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    p.mean[i] = offset_ + sigma2 * ka.col(i).dot(ak.col(i));
    const Eigen::VectorXd u2 = u.col(i).array().square();
    const Eigen::VectorXd v2 = v.col(i).array().square();
    p.variance[i] = std::max(0.0, sigma2 - sigma2 * sigma2 * u2.dot(inv * v2));
  }
  return p;
}

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }
constexpr double kLogitSpan = 8.0;

}  // namespace

GridGp fit_grid_mle(const Eigen::MatrixXd& outer, const Eigen::MatrixXd& inner, const Eigen::MatrixXd& y,
                    const MleOptions& options, const MleBounds& bounds) {
  if (outer.rows() * inner.rows() < 4) throw std::invalid_argument("MLE needs at least four training points");
  if (options.restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  const Eigen::Index r = inner.cols(), q = outer.cols();
  const auto p = static_cast<std::size_t>(r + q);
  const bool free_d = options.exponents == ExponentMode::free;

  const double mean = options.center ? y.mean() : 0.0;
  const Eigen::MatrixXd yc = y.array() - mean;
  double vy = yc.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, y.size() - (options.center ? 1 : 0)));
  if (!(vy > 0.0)) vy = 1.0;

  const Eigen::MatrixXd outer_s = InputScaling::fit(outer).apply(outer);
  const Eigen::MatrixXd inner_s = InputScaling::fit(inner).apply(inner);
  const double n = static_cast<double>(y.size());

  auto shape_kernel = [&](std::span<const double> th) {
    PowerExpKernel k;
    k.lengthscales.resize(static_cast<Eigen::Index>(p));
    k.exponents = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(p), 2.0);
    for (std::size_t j = 0; j < p; ++j) {
      k.lengthscales[static_cast<Eigen::Index>(j)] = std::exp(th[j]);
      if (free_d) k.exponents[static_cast<Eigen::Index>(j)] = 1.0 + logistic(th[p + j]);
    }
    return k;
  };

  const numerics::BoxBounds scale_box{{std::log(bounds.variance_lo), std::log(bounds.precision_lo)},
                                      {std::log(bounds.variance_hi), std::log(bounds.precision_hi)}};
  const numerics::NelderMeadOptions inner_nm{1e-7, 2000, 1};

  struct ScaleFit {
    double value;
    double log_variance_rel;
    double log_precision;
  };
  // Best (sigma^2, lambda) for a fixed kernel shape; value is the negative log likelihood.
  auto fit_scale = [&](const PowerExpKernel& shape, std::span<const double> warm) -> ScaleFit {
    const auto ea = eigen_of(correlation(slice(shape, r, q), outer_s, outer_s));
    const auto eb = eigen_of(correlation(slice(shape, 0, r), inner_s, inner_s));
    const Eigen::MatrixXd rot2 = (ea.vectors.transpose() * yc * eb.vectors).array().square();
    const Eigen::MatrixXd e = ea.values * eb.values.transpose();
    auto nll = [&](std::span<const double> s) {
      const double sigma2 = vy * std::exp(s[0]);
      const double nugget = std::exp(-s[1]) + kJitterStart * sigma2;
      const Eigen::ArrayXXd d = sigma2 * e.array() + nugget;
      return 0.5 * (rot2.array() / d).sum() + 0.5 * d.log().sum() + 0.5 * n * log_2pi();
    };
    const std::vector<double> steps{1.0, 1.0};
    const auto res = numerics::nelder_mead(nll, warm, steps, scale_box, inner_nm);
    return {res.value, res.x[0], res.x[1]};
  };

  // Outer coordinates: log l (p), logit(d - 1) (p, free mode).
  const std::size_t dims = p + (free_d ? p : 0);
  numerics::BoxBounds box;
  std::vector<double> start_lo, start_hi;
  for (std::size_t j = 0; j < p; ++j) {
    box.lower.push_back(std::log(bounds.lengthscale_lo));
    box.upper.push_back(std::log(bounds.lengthscale_hi));
    start_lo.push_back(std::log(0.05));
    start_hi.push_back(std::log(2.0));
  }
  if (free_d) {
    for (std::size_t j = 0; j < p; ++j) {
      box.lower.push_back(-kLogitSpan);
      box.upper.push_back(kLogitSpan);
      start_lo.push_back(-1.5);
      start_hi.push_back(1.5);
    }
  }
  const std::vector<double> warm_start{0.0, std::clamp(std::log(1e3 / vy), scale_box.lower[1], scale_box.upper[1])};

  const auto lhs = numerics::latin_hypercube(options.restarts, dims, options.seed);
  std::vector<numerics::NelderMeadResult> results(options.restarts);
  std::vector<double> steps(dims, 1.0);
  numerics::parallel_for(options.restarts, [&](std::size_t rs) {
    std::vector<double> th0(dims);
    for (std::size_t i = 0; i < dims; ++i) {
      const double u = rs == 0 ? 0.5 : lhs(static_cast<Eigen::Index>(rs), static_cast<Eigen::Index>(i));
      th0[i] = std::clamp(start_lo[i] + u * (start_hi[i] - start_lo[i]), box.lower[i], box.upper[i]);
    }
    auto objective = [&](std::span<const double> th) {
      try {
        return fit_scale(shape_kernel(th), warm_start).value;
      } catch (const ConditioningError&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    results[rs] = numerics::nelder_mead(objective, th0, steps, box, options.optimizer);
  });

  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (results[i].value < results[best].value) best = i;
  }
  if (!std::isfinite(results[best].value)) throw ConditioningError("gridded GP likelihood could not be evaluated");

  PowerExpKernel k = shape_kernel(results[best].x);
  const auto scale = fit_scale(k, warm_start);
  k.variance = vy * std::exp(scale.log_variance_rel);
  return GridGp(outer, inner, y, k, std::exp(scale.log_precision), options.center);
}

}  // namespace wkcal::gp
