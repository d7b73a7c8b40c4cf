#include "auditionlab/stats.hpp"

#include "auditionlab/errors.hpp"

#include <algorithm>
#include <cmath>

namespace auditionlab {

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double median(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

double stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

Interval normal_ci95(std::span<const double> xs) {
  const double m = mean(xs);
  if (xs.size() < 2) return {m, m};
  const double half = 1.96 * stddev(xs) / std::sqrt(static_cast<double>(xs.size()));
  return {m - half, m + half};
}

Interval bootstrap_median_ci95(std::span<const double> xs, int resamples, RandomStream& rng) {
  if (xs.empty() || resamples < 1) throw ValidationError("bootstrap needs data and resamples");
  std::vector<double> medians(static_cast<std::size_t>(resamples));
  std::vector<double> sample(xs.size());
  for (auto& m : medians) {
    for (auto& s : sample) s = xs[rng.index(xs.size())];
    m = median(sample);
  }
  std::sort(medians.begin(), medians.end());
  const auto at = [&](double q) {
    const auto i = static_cast<std::size_t>(std::floor(q * (medians.size() - 1) + 0.5));
    return medians[std::min(i, medians.size() - 1)];
  };
  return {at(0.025), at(0.975)};
}

}  // namespace auditionlab
