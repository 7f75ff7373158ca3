#pragma once

// Brute-force GP reference: explicit kernel loops, Gaussian elimination with
// partial pivoting for the determinant and every solve. Slow and independent of
// the library's factorization code.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;
using Vector = std::vector<double>;

struct DenseKernel {
  double variance;
  Vector lengthscales;
  Vector exponents;

  double operator()(const Vector& a, const Vector& b) const {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += std::pow(std::abs(a[j] - b[j]), exponents[j]) / lengthscales[j];
    return variance * std::exp(-s);
  }
};

// Scales each column of x to [0, 1] using the training columns' min and max.
inline Matrix standardize(const Matrix& x, const Matrix& train) {
  Matrix out = x;
  for (std::size_t j = 0; j < train[0].size(); ++j) {
    double lo = train[0][j], hi = train[0][j];
    for (const auto& row : train) lo = std::min(lo, row[j]), hi = std::max(hi, row[j]);
    const double range = hi > lo ? hi - lo : 1.0;
    for (auto& row : out) row[j] = (row[j] - lo) / range;
  }
  return out;
}

// Solves A X = B in place by elimination; returns log |det A| and the sign.
inline double eliminate(Matrix a, Matrix& b, int& sign) {
  const std::size_t n = a.size();
  double logdet = 0.0;
  sign = 1;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    if (a[piv][c] == 0.0) throw std::runtime_error("singular");
    if (piv != c) {
      std::swap(a[piv], a[c]);
      std::swap(b[piv], b[c]);
      sign = -sign;
    }
    logdet += std::log(std::abs(a[c][c]));
    if (a[c][c] < 0.0) sign = -sign;
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      for (std::size_t k = 0; k < b[r].size(); ++k) b[r][k] -= f * b[c][k];
    }
  }
  for (std::size_t c = n; c-- > 0;) {
    for (std::size_t k = 0; k < b[c].size(); ++k) {
      double s = b[c][k];
      for (std::size_t j = c + 1; j < n; ++j) s -= a[c][j] * b[j][k];
      b[c][k] = s / a[c][c];
    }
  }
  return logdet;
}

struct DenseGp {
  Matrix x;  // standardized
  Vector y;  // centered
  double offset;
  DenseKernel kernel;
  double nugget;

  Matrix gram() const {
    Matrix k(x.size(), Vector(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t j = 0; j < x.size(); ++j) k[i][j] = kernel(x[i], x[j]) + (i == j ? nugget : 0.0);
    }
    return k;
  }

  double log_marginal_likelihood() const {
    Matrix b(y.size(), Vector(1));
    for (std::size_t i = 0; i < y.size(); ++i) b[i][0] = y[i];
    int sign = 0;
    const double logdet = eliminate(gram(), b, sign);
    double quad = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) quad += y[i] * b[i][0];
    return -0.5 * quad - 0.5 * logdet - 0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
  }

  // Mean and latent variance at already-standardized points.
  void predict(const Matrix& xs, Vector& mean, Vector& var) const {
    Matrix b(x.size(), Vector(xs.size() + 1));
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t s = 0; s < xs.size(); ++s) b[i][s] = kernel(x[i], xs[s]);
      b[i][xs.size()] = y[i];
    }
    const Matrix ks = b;
    int sign = 0;
    eliminate(gram(), b, sign);
    mean.assign(xs.size(), offset);
    var.assign(xs.size(), 0.0);
    for (std::size_t s = 0; s < xs.size(); ++s) {
      double quad = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        mean[s] += ks[i][s] * b[i][xs.size()];
        quad += ks[i][s] * b[i][s];
      }
      var[s] = std::max(0.0, kernel(xs[s], xs[s]) - quad);
    }
  }
};

}  // namespace oracle
