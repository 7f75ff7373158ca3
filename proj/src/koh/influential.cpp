#include "wkcal/koh/influential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace wkcal::koh {

InfluentialPoints select_influential_points(std::span<const double> times, std::span<const double> flows,
                                            std::span<const double> pressures, std::size_t k) {
  const std::size_t n = times.size();
  if (flows.size() != n || pressures.size() != n) throw std::invalid_argument("cycle grid columns differ in length");
  if (k < 5) throw std::invalid_argument("at least 5 influential points are required");
  if (k > n) throw std::invalid_argument("requested " + std::to_string(k) + " influential points from a grid of " +
                                         std::to_string(n));
  for (std::size_t i = 1; i < n; ++i) {
    if (!(times[i] > times[i - 1])) throw std::invalid_argument("cycle grid times must be strictly increasing");
  }

  std::set<std::size_t> chosen{0, n - 1};
  chosen.insert(static_cast<std::size_t>(std::max_element(pressures.begin(), pressures.end()) - pressures.begin()));
  const auto peak_flow = static_cast<std::size_t>(std::max_element(flows.begin(), flows.end()) - flows.begin());
  if (flows[peak_flow] > 0.0) {
    const double level = 0.05 * flows[peak_flow];
    for (std::size_t i = peak_flow + 1; i < n; ++i) {
      if (flows[i] <= level) {
        chosen.insert(i);
        break;
      }
    }
  }

  while (chosen.size() < k) {
    std::size_t best = n;
    double best_gap = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen.contains(i)) continue;
      double gap = std::numeric_limits<double>::infinity();
      for (std::size_t c : chosen) gap = std::min(gap, std::abs(times[i] - times[c]));
      if (gap > best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    chosen.insert(best);
  }

  InfluentialPoints out;
  for (std::size_t i : chosen) {
    out.indices.push_back(i);
    out.times.push_back(times[i]);
    out.flows.push_back(flows[i]);
    out.pressures.push_back(pressures[i]);
  }
  return out;
}

}  // namespace wkcal::koh
