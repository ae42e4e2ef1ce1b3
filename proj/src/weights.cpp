#include "sasmc/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sasmc::weights {

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double shift = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(shift)) return shift;
  double sum = 0.0;
  for (double v : x) sum += std::exp(v - shift);
  return shift + std::log(sum);
}

double normalize(std::span<double> log_w) {
  const double log_norm = log_sum_exp(log_w);
  for (double& v : log_w) v -= log_norm;
  return log_norm;
}

double effective_sample_size(std::span<const double> normalized_log_w) {
  std::vector<double> doubled(normalized_log_w.begin(), normalized_log_w.end());
  for (double& v : doubled) v *= 2.0;
  return std::exp(-log_sum_exp(doubled));
}

double incremented_ess(std::span<const double> normalized_log_w, std::span<const double> log_lik,
                       double delta) {
  std::vector<double> w(normalized_log_w.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = normalized_log_w[i] + delta * log_lik[i];
  normalize(w);
  return effective_sample_size(w);
}

std::vector<std::size_t> systematic_resample(std::span<const double> normalized_log_w, double u) {
  const std::size_t n = normalized_log_w.size();
  std::vector<std::size_t> parents(n);
  const double step = 1.0 / static_cast<double>(n);
  double cumulative = std::exp(normalized_log_w[0]);
  std::size_t i = 0;
  for (std::size_t slot = 0; slot < n; ++slot) {
    const double point = u + static_cast<double>(slot) * step;
    while (point >= cumulative && i + 1 < n) cumulative += std::exp(normalized_log_w[++i]);
    parents[slot] = i;
  }
  return parents;
}

}  // namespace sasmc::weights
