#include "wkcal/koh/summary.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "wkcal/numerics/stats.hpp"

namespace wkcal::koh {

namespace {

constexpr double kTroughRatio = 0.8;
constexpr double kMinPeakFraction = 0.05;

double silverman(const std::vector<double>& sorted) {
  const double n = static_cast<double>(sorted.size());
  const double sd = std::sqrt(numerics::variance(sorted));
  const double iqr = numerics::quantile_sorted(sorted, 0.75) - numerics::quantile_sorted(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

}  // namespace

Kde kernel_density(std::span<const double> draws, std::size_t grid_size) {
  if (draws.size() < 2) throw std::invalid_argument("density estimate needs at least two draws");
  if (grid_size < 3) throw std::invalid_argument("density grid needs at least three points");
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());

  Kde k;
  k.bandwidth = silverman(sorted);
  if (!(k.bandwidth > 0.0)) return k;  // degenerate sample: no density
  const double lo = sorted.front() - 3.0 * k.bandwidth;
  const double hi = sorted.back() + 3.0 * k.bandwidth;
  const double norm = 1.0 / (static_cast<double>(sorted.size()) * k.bandwidth * std::sqrt(2.0 * std::numbers::pi));
  k.grid.resize(grid_size);
  k.density.assign(grid_size, 0.0);
  for (std::size_t g = 0; g < grid_size; ++g) {
    const double x = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid_size - 1);
    k.grid[g] = x;
    // Draws farther than 8 bandwidths contribute below 1e-14 and are skipped.
    const auto first = std::lower_bound(sorted.begin(), sorted.end(), x - 8.0 * k.bandwidth);
    const auto last = std::upper_bound(first, sorted.end(), x + 8.0 * k.bandwidth);
    double s = 0.0;
    for (auto it = first; it != last; ++it) {
      const double u = (x - *it) / k.bandwidth;
      s += std::exp(-0.5 * u * u);
    }
    k.density[g] = s * norm;
  }
  return k;
}

ParameterPosterior summarize_parameter(std::string name, std::span<const double> draws, std::size_t min_draws) {
  if (draws.size() < std::max<std::size_t>(min_draws, 2)) {
    throw std::invalid_argument("posterior summary needs at least " + std::to_string(min_draws) + " draws, got " +
                                std::to_string(draws.size()));
  }
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());

  ParameterPosterior p;
  p.name = std::move(name);
  // Accumulate offsets from the smallest draw so constant samples give their value exactly.
  double offset_sum = 0.0;
  for (double x : sorted) offset_sum += x - sorted.front();
  p.mean = sorted.front() + offset_sum / static_cast<double>(sorted.size());
  p.lower = numerics::quantile_sorted(sorted, 0.05);
  p.upper = numerics::quantile_sorted(sorted, 0.95);

  const Kde kde = kernel_density(sorted);
  if (kde.grid.empty()) {
    p.map = sorted.front();
    p.modes = {p.map};
    return p;
  }

  std::vector<std::size_t> peaks;
  const auto& d = kde.density;
  for (std::size_t g = 1; g + 1 < d.size(); ++g) {
    if (d[g] > d[g - 1] && d[g] >= d[g + 1]) peaks.push_back(g);
  }
  // A lone draw far out in a tail makes its own tiny bump; such bumps are not modes.
  const double top = *std::max_element(d.begin(), d.end());
  std::erase_if(peaks, [&](std::size_t g) { return d[g] < kMinPeakFraction * top; });
  if (peaks.empty()) peaks.push_back(static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin()));
  std::stable_sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });
  p.map = kde.grid[peaks[0]];
  p.modes = {p.map};

  if (peaks.size() >= 2) {
    const std::size_t a = std::min(peaks[0], peaks[1]), b = std::max(peaks[0], peaks[1]);
    const double trough = *std::min_element(d.begin() + static_cast<std::ptrdiff_t>(a), d.begin() + static_cast<std::ptrdiff_t>(b) + 1);
    if (trough < kTroughRatio * std::min(d[a], d[b])) {
      p.bimodal = true;
      p.modes = {kde.grid[a], kde.grid[b]};
    }
  }
  return p;
}

const ParameterPosterior& PosteriorSummary::at(const std::string& name) const {
  for (const auto& p : parameters) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("no posterior summary for " + name);
}

PosteriorSummary summarize(const PosteriorSamples& samples, std::size_t min_draws) {
  PosteriorSummary s;
  s.n_draws = samples.draws.size();
  s.parameters.push_back(summarize_parameter("R", samples.column(&Draw::R), min_draws));
  s.parameters.push_back(summarize_parameter("C", samples.column(&Draw::C), min_draws));
  s.parameters.push_back(summarize_parameter("lambda_b", samples.column(&Draw::lambda_b), min_draws));
  s.parameters.push_back(summarize_parameter("lambda_f", samples.column(&Draw::lambda_f), min_draws));
  return s;
}

}  // namespace wkcal::koh
