#include "wkcal/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "wkcal/errors.hpp"
#include "wkcal/numerics/parallel.hpp"
#include "wkcal/numerics/sampling.hpp"

namespace wkcal::gp {

void PowerExpKernel::validate() const {
  if (!(variance > 0.0) || !std::isfinite(variance)) throw std::invalid_argument("kernel variance must be positive");
  if (lengthscales.size() == 0 || exponents.size() != lengthscales.size()) {
    throw std::invalid_argument("kernel needs one lengthscale and one exponent per dimension");
  }
  for (Eigen::Index j = 0; j < lengthscales.size(); ++j) {
    if (!(lengthscales[j] > 0.0) || !std::isfinite(lengthscales[j])) {
      throw std::invalid_argument("kernel lengthscales must be positive");
    }
    if (!(exponents[j] >= 1.0 && exponents[j] <= 2.0)) {
      throw std::invalid_argument("kernel exponents must lie in [1, 2]");
    }
  }
}

PowerExpKernel PowerExpKernel::squared_exponential(double variance, Eigen::VectorXd lengthscales) {
  PowerExpKernel k;
  k.variance = variance;
  k.exponents = Eigen::VectorXd::Constant(lengthscales.size(), 2.0);
  k.lengthscales = std::move(lengthscales);
  return k;
}

namespace {

double log_correlation(const PowerExpKernel& k, const double* x, Eigen::Index xs, const double* y,
                       Eigen::Index ys) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < k.lengthscales.size(); ++j) {
    const double d = std::abs(x[j * xs] - y[j * ys]);
    const double e = k.exponents[j];
    const double p = e == 2.0 ? d * d : (e == 1.0 ? d : std::pow(d, e));
    s += p / k.lengthscales[j];
  }
  return -s;
}

}  // namespace

double kernel_eval(const PowerExpKernel& k, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != y.size() || static_cast<std::size_t>(x.size()) != k.dims()) {
    throw std::invalid_argument("kernel_eval: dimension mismatch");
  }
  return k.variance * std::exp(log_correlation(k, x.data(), 1, y.data(), 1));
}

Eigen::MatrixXd correlation(const PowerExpKernel& k, const Eigen::Ref<const Eigen::MatrixXd>& a,
                            const Eigen::Ref<const Eigen::MatrixXd>& b) {
  if (static_cast<std::size_t>(a.cols()) != k.dims() || static_cast<std::size_t>(b.cols()) != k.dims()) {
    throw std::invalid_argument("correlation: dimension mismatch");
  }
  Eigen::MatrixXd r(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      r(i, j) = std::exp(log_correlation(k, a.data() + i, a.outerStride(), b.data() + j, b.outerStride()));
    }
  }
  return r;
}

InputScaling InputScaling::fit(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  InputScaling s;
  s.offset = x.colwise().minCoeff();
  const Eigen::RowVectorXd range = x.colwise().maxCoeff() - s.offset;
  s.scale = range.unaryExpr([](double r) { return r > 0.0 ? 1.0 / r : 1.0; });
  return s;
}

InputScaling InputScaling::identity(Eigen::Index dims) {
  return {Eigen::RowVectorXd::Zero(dims), Eigen::RowVectorXd::Ones(dims)};
}

Eigen::MatrixXd InputScaling::apply(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  if (x.cols() != offset.size()) throw std::invalid_argument("input has the wrong number of columns");
  return (x.rowwise() - offset).array().rowwise() * scale.array();
}

GpModel::GpModel(Eigen::MatrixXd x, Eigen::VectorXd y, PowerExpKernel kernel, double noise_precision,
                 bool center, std::optional<InputScaling> scaling)
    : kernel_(std::move(kernel)), noise_precision_(noise_precision) {
  kernel_.validate();
  if (x.rows() < 2) throw std::invalid_argument("a GP needs at least two training points");
  if (x.rows() != y.size()) throw std::invalid_argument("design and output sizes differ");
  if (static_cast<std::size_t>(x.cols()) != kernel_.dims()) throw std::invalid_argument("kernel/design dimension mismatch");
  if (!(noise_precision > 0.0)) throw std::invalid_argument("noise precision must be positive");
  if (!y.allFinite() || !x.allFinite()) throw std::invalid_argument("training data must be finite");

  scaling_ = scaling ? *scaling : InputScaling::fit(x);
  x_ = scaling_.apply(x);
  offset_ = center ? y.mean() : 0.0;
  y_ = y.array() - offset_;

  const Eigen::MatrixXd r = correlation(kernel_, x_, x_);
  const double noise = std::isinf(noise_precision_) ? 0.0 : 1.0 / noise_precision_;
  for (double j = kJitterStart; j <= kJitterMax * (1.0 + 1e-9); j *= 10.0) {
    Eigen::MatrixXd k = kernel_.variance * r;
    const double nugget = noise + j * kernel_.variance;
    k.diagonal().array() += nugget;
    chol_.compute(k);
    if (chol_.info() == Eigen::Success) {
      const Eigen::VectorXd d = Eigen::MatrixXd(chol_.matrixL()).diagonal();
      if (d.allFinite() && (d.array() > 0.0).all()) {
        jitter_ = j;
        nugget_ = nugget;
        alpha_ = chol_.solve(y_);
        const double n = static_cast<double>(y_.size());
        log_likelihood_ = -0.5 * y_.dot(alpha_) - d.array().log().sum() - 0.5 * n * std::log(2.0 * std::numbers::pi);
        return;
      }
    }
  }
  throw ConditioningError("GP covariance not positive definite even with jitter 1e-4 * sigma^2");
}

GpModel::Prediction GpModel::predict(const Eigen::Ref<const Eigen::MatrixXd>& x_new) const {
  const Eigen::MatrixXd xs = scaling_.apply(x_new);
  const Eigen::MatrixXd ks = kernel_.variance * correlation(kernel_, x_, xs);
  Prediction p;
  p.mean = (ks.transpose() * alpha_).array() + offset_;
  const Eigen::MatrixXd v = chol_.matrixL().solve(ks);
  p.variance = (kernel_.variance - v.colwise().squaredNorm().array()).max(0.0).matrix().transpose();
  return p;
}

GpModel::JointPrediction GpModel::predict_joint(const Eigen::Ref<const Eigen::MatrixXd>& x_new) const {
  const Eigen::MatrixXd xs = scaling_.apply(x_new);
  const Eigen::MatrixXd ks = kernel_.variance * correlation(kernel_, x_, xs);
  JointPrediction p;
  p.mean = (ks.transpose() * alpha_).array() + offset_;
  const Eigen::MatrixXd v = chol_.matrixL().solve(ks);
  p.covariance = kernel_.variance * correlation(kernel_, xs, xs) - v.transpose() * v;
  return p;
}

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

constexpr double kLogitSpan = 8.0;

}  // namespace

GpModel fit_mle(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const MleOptions& options,
                const MleBounds& bounds) {
  if (x.rows() < 4) throw std::invalid_argument("MLE needs at least four training points");
  if (options.restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  const auto p = static_cast<std::size_t>(x.cols());
  const bool free_d = options.exponents == ExponentMode::free;
  const InputScaling scaling = InputScaling::fit(x);

  double vy = 0.0;
  if (options.center) {
    vy = (y.array() - y.mean()).square().sum() / static_cast<double>(y.size() - 1);
  } else {
    vy = y.squaredNorm() / static_cast<double>(y.size());
  }
  if (!(vy > 0.0)) vy = 1.0;

  // theta = [log(sigma^2 / var y), log l (p), logit(d - 1) (p, free mode), log lambda]
  const std::size_t dims = 1 + p + (free_d ? p : 0) + 1;
  numerics::BoxBounds box;
  box.lower.push_back(std::log(bounds.variance_lo));
  box.upper.push_back(std::log(bounds.variance_hi));
  for (std::size_t j = 0; j < p; ++j) {
    box.lower.push_back(std::log(bounds.lengthscale_lo));
    box.upper.push_back(std::log(bounds.lengthscale_hi));
  }
  if (free_d) {
    for (std::size_t j = 0; j < p; ++j) {
      box.lower.push_back(-kLogitSpan);
      box.upper.push_back(kLogitSpan);
    }
  }
  box.lower.push_back(std::log(bounds.precision_lo));
  box.upper.push_back(std::log(bounds.precision_hi));

  auto decode = [&](std::span<const double> th, double& noise_precision) {
    PowerExpKernel k;
    k.variance = vy * std::exp(th[0]);
    k.lengthscales.resize(static_cast<Eigen::Index>(p));
    k.exponents = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(p), 2.0);
    for (std::size_t j = 0; j < p; ++j) {
      k.lengthscales[static_cast<Eigen::Index>(j)] = std::exp(th[1 + j]);
      if (free_d) k.exponents[static_cast<Eigen::Index>(j)] = 1.0 + logistic(th[1 + p + j]);
    }
    noise_precision = std::exp(th[dims - 1]);
    return k;
  };
  auto objective = [&](std::span<const double> th) {
    double lambda = 0.0;
    const auto k = decode(th, lambda);
    try {
      return -GpModel(x, y, k, lambda, options.center, scaling).log_marginal_likelihood();
    } catch (const ConditioningError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  // Start box: moderate signal, lengthscales on the design scale, 1e-4..0.5 noise fraction.
  std::vector<double> start_lo, start_hi;
  start_lo.push_back(std::log(0.2));
  start_hi.push_back(std::log(5.0));
  for (std::size_t j = 0; j < p; ++j) {
    start_lo.push_back(std::log(0.05));
    start_hi.push_back(std::log(2.0));
  }
  if (free_d) {
    for (std::size_t j = 0; j < p; ++j) {
      start_lo.push_back(-1.5);
      start_hi.push_back(1.5);
    }
  }
  start_lo.push_back(std::log(2.0 / vy));
  start_hi.push_back(std::log(1e4 / vy));

  const auto lhs = numerics::latin_hypercube(options.restarts, dims, options.seed);
  std::vector<numerics::NelderMeadResult> results(options.restarts);
  const std::vector<double> steps(dims, 1.0);
  numerics::parallel_for(options.restarts, [&](std::size_t r) {
    std::vector<double> th0(dims);
    for (std::size_t i = 0; i < dims; ++i) {
      const double u = r == 0 ? 0.5 : lhs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i));
      th0[i] = std::clamp(start_lo[i] + u * (start_hi[i] - start_lo[i]), box.lower[i], box.upper[i]);
    }
    results[r] = numerics::nelder_mead(objective, th0, steps, box, options.optimizer);
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < results.size(); ++r) {
    if (results[r].value < results[best].value) best = r;
  }
  if (!std::isfinite(results[best].value)) {
    throw ConditioningError("GP likelihood could not be evaluated at any restart");
  }
  double lambda = 0.0;
  const auto k = decode(results[best].x, lambda);
  return GpModel(x, y, k, lambda, options.center, scaling);
}

}  // namespace wkcal::gp
