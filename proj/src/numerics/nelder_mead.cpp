#include "wkcal/numerics/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace wkcal::numerics {

void BoxBounds::clamp(std::span<double> x) const {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
}

bool BoxBounds::contains(std::span<const double> x) const {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
  }
  return true;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class Simplex {
 public:
  Simplex(const Objective& f, const std::optional<BoxBounds>& bounds, std::size_t budget,
          std::size_t& evaluations)
      : f_(f), bounds_(bounds), budget_(budget), evaluations_(evaluations) {}

  double evaluate(std::vector<double>& x) {
    if (bounds_) bounds_->clamp(x);
    ++evaluations_;
    const double v = f_(x);
    return std::isfinite(v) ? v : kInf;
  }

  // One simplex descent from x0; returns true when the diameter test passed.
  bool run(std::vector<double> x0, double f0, std::span<const double> steps, double tolerance,
           std::vector<double>& best, double& best_value) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> v(n + 1, x0);
    std::vector<double> fv(n + 1, f0);
    for (std::size_t i = 0; i < n; ++i) {
      v[i + 1][i] += steps[i];
      if (bounds_) {
        bounds_->clamp(v[i + 1]);
        if (v[i + 1][i] == x0[i]) {
          v[i + 1][i] = x0[i] - steps[i];
          bounds_->clamp(v[i + 1]);
        }
      }
      fv[i + 1] = evaluate(v[i + 1]);
    }

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);
    bool converged = false;
    while (true) {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
      const auto& xb = v[order.front()];

      double diameter = 0.0;
      for (const auto& vi : v) {
        for (std::size_t j = 0; j < n; ++j) diameter = std::max(diameter, std::abs(vi[j] - xb[j]));
      }
      if (diameter < tolerance) {
        converged = true;
        break;
      }
      if (evaluations_ >= budget_) break;

      const std::size_t worst = order.back();
      std::fill(centroid.begin(), centroid.end(), 0.0);
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < n; ++j) centroid[j] += v[order[k]][j];
      }
      for (double& c : centroid) c /= static_cast<double>(n);

      for (std::size_t j = 0; j < n; ++j) xr[j] = centroid[j] + (centroid[j] - v[worst][j]);
      const double fr = evaluate(xr);
      const double f_best = fv[order.front()];
      const double f_second = fv[order[n - 1]];

      if (fr < f_best) {
        for (std::size_t j = 0; j < n; ++j) xe[j] = centroid[j] + 2.0 * (centroid[j] - v[worst][j]);
        const double fe = evaluate(xe);
        if (fe < fr) {
          v[worst] = xe;
          fv[worst] = fe;
        } else {
          v[worst] = xr;
          fv[worst] = fr;
        }
        continue;
      }
      if (fr < f_second) {
        v[worst] = xr;
        fv[worst] = fr;
        continue;
      }

      bool accepted = false;
      if (fr < fv[worst]) {
        for (std::size_t j = 0; j < n; ++j) xc[j] = centroid[j] + 0.5 * (xr[j] - centroid[j]);
        const double fc = evaluate(xc);
        if (fc <= fr) {
          v[worst] = xc;
          fv[worst] = fc;
          accepted = true;
        }
      } else {
        for (std::size_t j = 0; j < n; ++j) xc[j] = centroid[j] + 0.5 * (v[worst][j] - centroid[j]);
        const double fc = evaluate(xc);
        if (fc < fv[worst]) {
          v[worst] = xc;
          fv[worst] = fc;
          accepted = true;
        }
      }
      if (!accepted) {
        const std::vector<double> anchor = v[order.front()];
        for (std::size_t k = 1; k <= n; ++k) {
          auto& vk = v[order[k]];
          for (std::size_t j = 0; j < n; ++j) vk[j] = anchor[j] + 0.5 * (vk[j] - anchor[j]);
          fv[order[k]] = evaluate(vk);
        }
      }
    }

    const auto it = std::min_element(fv.begin(), fv.end());
    best = v[static_cast<std::size_t>(it - fv.begin())];
    best_value = *it;
    return converged;
  }

 private:
  const Objective& f_;
  const std::optional<BoxBounds>& bounds_;
  std::size_t budget_;
  std::size_t& evaluations_;
};

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, std::span<const double> start,
                             std::span<const double> steps,
                             const std::optional<BoxBounds>& bounds,
                             const NelderMeadOptions& options) {
  const std::size_t n = start.size();
  if (n == 0 || steps.size() != n) throw std::invalid_argument("nelder_mead: dimension mismatch");
  if (bounds && (bounds->lower.size() != n || bounds->upper.size() != n)) {
    throw std::invalid_argument("nelder_mead: bounds dimension mismatch");
  }

  NelderMeadResult result;
  Simplex simplex(f, bounds, options.max_evaluations, result.evaluations);
  std::vector<double> x(start.begin(), start.end());
  double fx = simplex.evaluate(x);

  for (std::size_t attempt = 0; attempt <= options.restarts; ++attempt) {
    std::vector<double> best;
    double best_value = kInf;
    const bool converged = simplex.run(x, fx, steps, options.tolerance, best, best_value);
    const double improvement = fx - best_value;
    x = std::move(best);
    fx = best_value;
    result.converged = converged;
    if (!converged) break;
    if (attempt > 0 && !(improvement > 1e-12 * (1.0 + std::abs(fx)))) break;
  }

  result.x = std::move(x);
  result.value = fx;
  return result;
}

}  // namespace wkcal::numerics
