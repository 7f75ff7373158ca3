#include "wkcal/koh/bias.hpp"

#include <stdexcept>

namespace wkcal::koh {

Eigen::MatrixXd BiasModel::correlation(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                       const Eigen::Ref<const Eigen::MatrixXd>& b) const {
  return gp::correlation(kernel, scaling.apply(a), scaling.apply(b));
}

BiasModel fit_bias(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& residuals, const gp::MleOptions& mle) {
  gp::MleOptions opts = mle;
  opts.exponents = gp::ExponentMode::fixed_2;
  opts.center = false;
  const auto model = gp::fit_mle(inputs, residuals, opts);
  BiasModel b;
  b.kernel = model.kernel();
  b.lambda_b_hat = 1.0 / b.kernel.variance;
  b.kernel.variance = 1.0;
  b.scaling = model.scaling();
  b.lambda_f_hat = model.noise_precision();
  b.residuals = residuals;
  return b;
}

BiasModel stage2_init_bias(const TrainedEmulator& emulator, const FieldInputs& field, double R0, double C0,
                           const gp::MleOptions& mle) {
  if (!emulator.design.box.contains(R0, C0)) {
    throw std::invalid_argument("initial guess (R0, C0) lies outside the emulator design box");
  }
  const auto targets = emulator.gp.prepare(field.x);
  const auto pred = emulator.predict(targets, R0, C0, false);
  BiasModel b = fit_bias(field.x, field.y - pred.mean, mle);
  b.R0 = R0;
  b.C0 = C0;
  return b;
}

}  // namespace wkcal::koh
