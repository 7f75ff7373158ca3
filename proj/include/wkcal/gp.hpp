#pragma once

// Gaussian-process regression with the separable power-exponential kernel
//
//   k(x, x') = sigma^2 * exp(-sum_j |x_j - x'_j|^d_j / l_j),   1 <= d_j <= 2.
//
// Inputs are rescaled per dimension to [0, 1] using the training design, so
// lengthscales are expressed in those units.

#include <cstddef>
#include <cstdint>
#include <optional>

#include <Eigen/Dense>

#include "wkcal/numerics/nelder_mead.hpp"

namespace wkcal::gp {

struct PowerExpKernel {
  double variance = 1.0;
  Eigen::VectorXd lengthscales;
  Eigen::VectorXd exponents;

  std::size_t dims() const noexcept { return static_cast<std::size_t>(lengthscales.size()); }
  void validate() const;

  /// Squared-exponential kernel (all exponents 2).
  static PowerExpKernel squared_exponential(double variance, Eigen::VectorXd lengthscales);
};

double kernel_eval(const PowerExpKernel& k, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y);

/// Correlation (unit variance) between the rows of a and b.
Eigen::MatrixXd correlation(const PowerExpKernel& k, const Eigen::Ref<const Eigen::MatrixXd>& a,
                            const Eigen::Ref<const Eigen::MatrixXd>& b);

/// Affine map of raw inputs to [0, 1] per column; constant columns map to 0.
struct InputScaling {
  Eigen::RowVectorXd offset;
  Eigen::RowVectorXd scale;

  static InputScaling fit(const Eigen::Ref<const Eigen::MatrixXd>& x);
  static InputScaling identity(Eigen::Index dims);
  Eigen::MatrixXd apply(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
};

/// Diagonal jitter ladder relative to the kernel variance.
inline constexpr double kJitterStart = 1e-8;
inline constexpr double kJitterMax = 1e-4;

class GpModel {
 public:
  /// x: raw n x p inputs, y: raw outputs. `noise_precision` may be +inf for an
  /// interpolating model. With `center`, y is shifted by its sample mean.
  GpModel(Eigen::MatrixXd x, Eigen::VectorXd y, PowerExpKernel kernel, double noise_precision,
          bool center = true, std::optional<InputScaling> scaling = std::nullopt);

  double log_marginal_likelihood() const noexcept { return log_likelihood_; }

  struct Prediction {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;  // latent function, excludes observation noise; clamped >= 0
  };
  Prediction predict(const Eigen::Ref<const Eigen::MatrixXd>& x_new) const;

  struct JointPrediction {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
  };
  JointPrediction predict_joint(const Eigen::Ref<const Eigen::MatrixXd>& x_new) const;

  const PowerExpKernel& kernel() const noexcept { return kernel_; }
  double noise_precision() const noexcept { return noise_precision_; }
  /// Jitter actually added, relative to the kernel variance.
  double jitter() const noexcept { return jitter_; }
  /// Total diagonal term added to sigma^2 * R: 1/lambda + jitter * sigma^2.
  double nugget() const noexcept { return nugget_; }
  double output_offset() const noexcept { return offset_; }
  const InputScaling& scaling() const noexcept { return scaling_; }
  /// Standardized design and centered outputs.
  const Eigen::MatrixXd& design() const noexcept { return x_; }
  const Eigen::VectorXd& outputs() const noexcept { return y_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(x_.rows()); }

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  PowerExpKernel kernel_;
  double noise_precision_;
  double offset_ = 0.0;
  InputScaling scaling_;
  double jitter_ = 0.0;
  double nugget_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
  double log_likelihood_ = 0.0;
};

enum class ExponentMode { fixed_2, free };

struct MleOptions {
  ExponentMode exponents = ExponentMode::free;
  std::size_t restarts = 4;
  std::uint64_t seed = 0x6b;
  bool center = true;
  numerics::NelderMeadOptions optimizer{1e-5, 3000, 1};
};

/// Hyperparameter search box, shared by the dense and gridded models.
struct MleBounds {
  double lengthscale_lo = 1e-3, lengthscale_hi = 1e3;  // standardized input units
  double variance_lo = 1e-6, variance_hi = 1e6;          // multiples of var(y)
  double precision_lo = 1e-6, precision_hi = 1e8;
};

/// Maximizes the log marginal likelihood over (sigma^2, l, d, lambda) by
/// multi-start Nelder-Mead in log / logit coordinates. Throws ConditioningError
/// when no restart yields a factorizable covariance.
GpModel fit_mle(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const MleOptions& options = {},
                const MleBounds& bounds = {});

}  // namespace wkcal::gp
