#pragma once

// Gaussian process on a crossed design: every row of an "outer" design (here the
// calibration parameters) paired with every row of an "inner" design (field
// inputs). With a separable kernel the covariance is
//
//   sigma^2 * (R_outer kron R_inner) + s * I,
//
// so the likelihood and predictions only need the eigendecompositions of the two
// small factors instead of a Cholesky factor of the full N*k matrix.

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

#include "wkcal/gp.hpp"

namespace wkcal::gp {

class GridGp {
 public:
  /// outer: N x q, inner: k x r, y: N x k with y(p, q) the output at
  /// (outer row p, inner row q). Kernel dimensions are ordered inner columns
  /// first, then outer columns.
  GridGp(Eigen::MatrixXd outer, Eigen::MatrixXd inner, Eigen::MatrixXd y, PowerExpKernel kernel,
         double noise_precision, bool center = true);

  double log_marginal_likelihood() const noexcept { return log_likelihood_; }

  /// Inner-side quantities for a fixed set of prediction inputs, reused across
  /// many outer points.
  class Targets {
   public:
    Eigen::Index size() const noexcept { return cross_.cols(); }

   private:
    friend class GridGp;
    Eigen::MatrixXd cross_;        // R_inner(design, targets), k x n
    Eigen::MatrixXd rotated_;      // Q_inner^T cross_, k x n
    Eigen::MatrixXd self_;         // R_inner(targets, targets), n x n
    Eigen::MatrixXd mean_weights_; // A_alpha * cross_, N x n
  };

  /// `inner_targets` are raw inner inputs (n x r).
  Targets prepare(const Eigen::Ref<const Eigen::MatrixXd>& inner_targets) const;

  /// Joint predictive distribution of the latent function at one outer point
  /// and all prepared inner targets. Covariance is skipped when not requested.
  GpModel::JointPrediction predict(const Targets& targets, const Eigen::Ref<const Eigen::RowVectorXd>& outer_point,
                                   bool with_covariance = true) const;

  /// Marginal prediction at arbitrary full rows [inner..., outer...].
  GpModel::Prediction predict_rows(const Eigen::Ref<const Eigen::MatrixXd>& rows) const;

  const PowerExpKernel& kernel() const noexcept { return kernel_; }
  double noise_precision() const noexcept { return noise_precision_; }
  double nugget() const noexcept { return nugget_; }
  double output_offset() const noexcept { return offset_; }
  Eigen::Index outer_size() const noexcept { return outer_.rows(); }
  Eigen::Index inner_size() const noexcept { return inner_.rows(); }
  const InputScaling& outer_scaling() const noexcept { return outer_scaling_; }
  const InputScaling& inner_scaling() const noexcept { return inner_scaling_; }

 private:
  Eigen::RowVectorXd outer_correlation(const Eigen::Ref<const Eigen::RowVectorXd>& scaled) const;

  Eigen::MatrixXd outer_, inner_;  // standardized
  PowerExpKernel kernel_, outer_kernel_, inner_kernel_;
  double noise_precision_;
  double offset_ = 0.0;
  double nugget_ = 0.0;
  InputScaling outer_scaling_, inner_scaling_;
  Eigen::MatrixXd q_outer_, q_inner_;
  Eigen::VectorXd e_outer_, e_inner_;
  Eigen::MatrixXd denom_;  // sigma^2 e_outer e_inner^T + s
  Eigen::MatrixXd alpha_;  // (K^-1 vec y) reshaped N x k
  double log_likelihood_ = 0.0;
};

/// Maximum-likelihood GridGp. The search is nested: an outer Nelder-Mead over the
/// kernel shape (lengthscales, exponents) and, for each shape, an inner search
/// over (sigma^2, lambda) that reuses that shape's eigendecompositions.
GridGp fit_grid_mle(const Eigen::MatrixXd& outer, const Eigen::MatrixXd& inner, const Eigen::MatrixXd& y,
                    const MleOptions& options = {}, const MleBounds& bounds = {});

}  // namespace wkcal::gp
