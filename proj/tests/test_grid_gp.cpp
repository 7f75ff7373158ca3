#include <gtest/gtest.h>

#include <cmath>

#include "wkcal/grid_gp.hpp"
#include "wkcal/numerics/rng.hpp"
#include "wkcal/numerics/sampling.hpp"

using namespace wkcal;
using namespace wkcal::gp;

namespace {

struct Crossed {
  Eigen::MatrixXd outer, inner, y;
  PowerExpKernel kernel;
};

double response(double a, double b, double c, double d) {
  return 40.0 * std::sin(2.0 * a) * c + 10.0 * b * d + 3.0 * a * b;
}

Crossed make_crossed(std::uint64_t seed, Eigen::Index n_outer, Eigen::Index n_inner) {
  Crossed c;
  c.outer = 0.5 + 2.5 * numerics::latin_hypercube(static_cast<std::size_t>(n_outer), 2, seed).array();
  c.inner.resize(n_inner, 2);
  for (Eigen::Index q = 0; q < n_inner; ++q) {
    const double t = 0.85 * static_cast<double>(q) / static_cast<double>(n_inner);
    c.inner(q, 0) = t < 0.3 ? 400.0 * std::sin(3.14159 * t / 0.3) : 0.0;
    c.inner(q, 1) = t;
  }
  c.y.resize(n_outer, n_inner);
  for (Eigen::Index p = 0; p < n_outer; ++p) {
    for (Eigen::Index q = 0; q < n_inner; ++q) {
      c.y(p, q) = response(c.inner(q, 0) / 400.0, c.inner(q, 1), c.outer(p, 0), c.outer(p, 1));
    }
  }
  c.kernel.variance = 150.0;
  c.kernel.lengthscales = Eigen::Vector4d(0.4, 0.2, 0.8, 1.3);
  c.kernel.exponents = Eigen::Vector4d(1.9, 1.6, 2.0, 1.2);
  return c;
}

// Full rows [inner..., outer...] in the order vec(y) uses: inner index fastest.
Eigen::MatrixXd full_rows(const Crossed& c) {
  Eigen::MatrixXd rows(c.outer.rows() * c.inner.rows(), 4);
  Eigen::Index i = 0;
  for (Eigen::Index p = 0; p < c.outer.rows(); ++p) {
    for (Eigen::Index q = 0; q < c.inner.rows(); ++q, ++i) {
      rows.row(i) << c.inner.row(q), c.outer.row(p);
    }
  }
  return rows;
}

Eigen::VectorXd flat(const Eigen::MatrixXd& y) {
  Eigen::VectorXd v(y.size());
  Eigen::Index i = 0;
  for (Eigen::Index p = 0; p < y.rows(); ++p) {
    for (Eigen::Index q = 0; q < y.cols(); ++q) v[i++] = y(p, q);
  }
  return v;
}

}  // namespace

TEST(GridGp, LikelihoodMatchesDenseModel) {
  for (double lambda : {0.5, 50.0, 1e6}) {
    const auto c = make_crossed(3, 12, 5);
    const GridGp grid(c.outer, c.inner, c.y, c.kernel, lambda);
    const GpModel dense(full_rows(c), flat(c.y), c.kernel, lambda);
    ASSERT_EQ(dense.jitter(), kJitterStart);
    EXPECT_LT(std::abs(grid.log_marginal_likelihood() - dense.log_marginal_likelihood()) /
                  std::abs(dense.log_marginal_likelihood()),
              1e-8)
        << "lambda " << lambda;
  }
}

TEST(GridGp, RowPredictionsMatchDenseModel) {
  const auto c = make_crossed(4, 10, 6);
  const GridGp grid(c.outer, c.inner, c.y, c.kernel, 20.0);
  const GpModel dense(full_rows(c), flat(c.y), c.kernel, 20.0);
  Eigen::MatrixXd probe(7, 4);
  numerics::CounterRng rng(8);
  for (Eigen::Index i = 0; i < probe.rows(); ++i) {
    probe.row(i) << 400.0 * rng.uniform(), 0.85 * rng.uniform(), 0.5 + 2.5 * rng.uniform(), 0.5 + 2.5 * rng.uniform();
  }
  const auto a = grid.predict_rows(probe);
  const auto b = dense.predict(probe);
  for (Eigen::Index i = 0; i < probe.rows(); ++i) {
    EXPECT_NEAR(a.mean[i], b.mean[i], 1e-8 * std::max(1.0, std::abs(b.mean[i])));
    EXPECT_NEAR(a.variance[i], b.variance[i], 1e-8 * c.kernel.variance);
  }
}

TEST(GridGp, JointPredictionMatchesDenseModel) {
  const auto c = make_crossed(5, 9, 5);
  const GridGp grid(c.outer, c.inner, c.y, c.kernel, 100.0);
  const GpModel dense(full_rows(c), flat(c.y), c.kernel, 100.0);
  Eigen::MatrixXd targets(4, 2);
  targets << 350.0, 0.1, 0.0, 0.5, 120.0, 0.27, 0.0, 0.84;
  const Eigen::RowVector2d point(1.3, 2.2);
  const auto prepared = grid.prepare(targets);
  const auto a = grid.predict(prepared, point);
  Eigen::MatrixXd rows(4, 4);
  for (Eigen::Index i = 0; i < 4; ++i) rows.row(i) << targets.row(i), point;
  const auto b = dense.predict_joint(rows);
  EXPECT_LT((a.mean - b.mean).cwiseAbs().maxCoeff(), 1e-8 * std::max(1.0, b.mean.cwiseAbs().maxCoeff()));
  EXPECT_LT((a.covariance - b.covariance).cwiseAbs().maxCoeff(), 1e-8 * c.kernel.variance);
  const auto mean_only = grid.predict(prepared, point, false);
  EXPECT_EQ(mean_only.covariance.size(), 0);
  EXPECT_LT((mean_only.mean - a.mean).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GridGp, RejectsMisshapenOutputs) {
  const auto c = make_crossed(6, 6, 4);
  EXPECT_THROW(GridGp(c.outer, c.inner, c.y.transpose(), c.kernel, 1.0), std::invalid_argument);
}

TEST(GridGp, MleImprovesOnStartAndPredictsHeldOut) {
  const auto c = make_crossed(7, 40, 6);
  MleOptions opts;
  opts.restarts = 2;
  const auto fitted = fit_grid_mle(c.outer, c.inner, c.y, opts);
  const GridGp reference(c.outer, c.inner, c.y, c.kernel, 1e3);
  EXPECT_GE(fitted.log_marginal_likelihood(), reference.log_marginal_likelihood());

  Eigen::MatrixXd probe(20, 4);
  Eigen::VectorXd truth(20);
  numerics::CounterRng rng(17);
  for (Eigen::Index i = 0; i < 20; ++i) {
    const Eigen::Index q = i % c.inner.rows();
    const double a = 0.6 + 2.3 * rng.uniform(), b = 0.6 + 2.3 * rng.uniform();
    probe.row(i) << c.inner.row(q), a, b;
    truth[i] = response(c.inner(q, 0) / 400.0, c.inner(q, 1), a, b);
  }
  const auto pred = fitted.predict_rows(probe);
  const double rmse = std::sqrt((pred.mean - truth).squaredNorm() / 20.0);
  EXPECT_LT(rmse, 0.5);
}
