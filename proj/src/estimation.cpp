#include "sasmc/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sasmc/errors.hpp"

namespace sasmc {
namespace {

struct SystemView {
  std::vector<DipoleConfig> configs;
  std::vector<double> log_weights;

  explicit SystemView(const ParticleSystem& system) {
    configs.reserve(system.particles.size());
    log_weights.reserve(system.particles.size());
    for (const Particle& p : system.particles) {
      configs.push_back(p.config);
      log_weights.push_back(p.log_weight);
    }
  }
  WeightedConfigs view() const { return {configs, log_weights}; }
};

// Minimum over injections of the `small` set into the `large` set of the
// summed distances.
double best_pairing(std::span<const GridIndex> small, std::span<const GridIndex> large,
                    const SourceGrid& grid, std::size_t k, std::vector<bool>& used) {
  if (k == small.size()) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < large.size(); ++j) {
    if (used[j]) continue;
    used[j] = true;
    const double here = (grid.points[static_cast<std::size_t>(small[k])] -
                         grid.points[static_cast<std::size_t>(large[j])]).norm();
    best = std::min(best, here + best_pairing(small, large, grid, k + 1, used));
    used[j] = false;
  }
  return best;
}

}  // namespace

std::vector<double> number_posterior(const WeightedConfigs& particles, std::size_t d_max) {
  std::vector<double> p(d_max + 1, 0.0);
  for (std::size_t i = 0; i < particles.configs.size(); ++i) {
    const std::size_t d = particles.configs[i].size();
    if (d > d_max) throw std::invalid_argument("number_posterior: particle exceeds d_max");
    p[d] += std::exp(particles.log_weights[i]);
  }
  return p;
}

std::vector<double> number_posterior(const ParticleSystem& system, std::size_t d_max) {
  return number_posterior(SystemView(system).view(), d_max);
}

std::size_t mode_count(std::span<const double> posterior) {
  std::size_t best = 0;
  for (std::size_t d = 1; d < posterior.size(); ++d) {
    if (posterior[d] > posterior[best]) best = d;
  }
  return best;
}

IntensityMap conditional_intensity(const WeightedConfigs& particles, std::size_t d_hat) {
  IntensityMap out;
  bool any = false;
  for (std::size_t i = 0; i < particles.configs.size(); ++i) {
    if (particles.configs[i].size() != d_hat) continue;
    any = true;
    const double w = std::exp(particles.log_weights[i]);
    for (GridIndex c : particles.configs[i]) out[c] += w;
  }
  if (!any) throw EstimationError("conditional_intensity: no particle has the estimated dipole count");
  return out;
}

IntensityMap conditional_intensity(const ParticleSystem& system, std::size_t d_hat) {
  return conditional_intensity(SystemView(system).view(), d_hat);
}

IntensityMap unconditional_intensity(const WeightedConfigs& particles) {
  IntensityMap out;
  for (std::size_t i = 0; i < particles.configs.size(); ++i) {
    const double w = std::exp(particles.log_weights[i]);
    for (GridIndex c : particles.configs[i]) out[c] += w;
  }
  return out;
}

IntensityMap unconditional_intensity(const ParticleSystem& system) {
  return unconditional_intensity(SystemView(system).view());
}

PeakExtraction extract_peak_locations(const IntensityMap& intensity, const SourceGrid& grid,
                                      std::size_t d_hat, double suppression_radius) {
  PeakExtraction out;
  const double radius2 = suppression_radius * suppression_radius * (1.0 + 1e-9);
  std::vector<std::pair<GridIndex, double>> remaining(intensity.begin(), intensity.end());
  while (out.peaks.size() < d_hat) {
    // Map iteration is by ascending index, so strict '>' keeps the lower index on ties.
    const std::pair<GridIndex, double>* best = nullptr;
    for (const auto& entry : remaining) {
      if (entry.second > 0.0 && (!best || entry.second > best->second)) best = &entry;
    }
    if (!best) {
      out.shortfall = true;
      break;
    }
    const GridIndex peak = best->first;
    out.peaks.push_back(peak);
    const Vec3& z = grid.points[static_cast<std::size_t>(peak)];
    std::erase_if(remaining, [&](const auto& entry) {
      return (grid.points[static_cast<std::size_t>(entry.first)] - z).squaredNorm() <= radius2;
    });
  }
  return out;
}

std::optional<MomentPosterior> estimate_moments(const SemiLinearModel& model,
                                                std::span<const GridIndex> locations,
                                                const TimeSeriesData& y) {
  if (locations.empty()) return std::nullopt;
  return conditional_moment_posterior(model, DipoleConfig(std::vector<GridIndex>(locations.begin(), locations.end())), y);
}

Eigen::MatrixXd moment_strengths(const MomentPosterior& posterior) {
  const auto d = posterior.covariance.rows() / 3;
  Eigen::MatrixXd s(d, static_cast<Eigen::Index>(posterior.means.size()));
  for (std::size_t t = 0; t < posterior.means.size(); ++t) {
    for (Eigen::Index k = 0; k < d; ++k) {
      s(k, static_cast<Eigen::Index>(t)) = posterior.means[t].segment<3>(3 * k).norm();
    }
  }
  return s;
}

int delta_d(const DipoleConfig& truth, std::span<const GridIndex> estimate) {
  return static_cast<int>(estimate.size()) - static_cast<int>(truth.size());
}

double delta_c(std::span<const GridIndex> truth, std::span<const GridIndex> estimate,
               const SourceGrid& grid) {
  if (truth.empty() || estimate.empty()) {
    throw EstimationError("delta_c: undefined for an empty configuration");
  }
  const bool estimate_smaller = truth.size() >= estimate.size();
  const auto small = estimate_smaller ? estimate : truth;
  const auto large = estimate_smaller ? truth : estimate;
  std::vector<bool> used(large.size(), false);
  return best_pairing(small, large, grid, 0, used) / static_cast<double>(small.size());
}

PosteriorSummary summarize(const ParticleSystem& system, const SemiLinearModel& model,
                           const TimeSeriesData& y, const SourceGrid& grid) {
  const SystemView view(system);
  PosteriorSummary s;
  s.number_posterior = number_posterior(view.view(), model.d_max);
  s.d_hat = mode_count(s.number_posterior);
  s.intensity_unconditional = unconditional_intensity(view.view());
  if (s.d_hat > 0) {
    s.intensity_conditional = conditional_intensity(view.view(), s.d_hat);
    const PeakExtraction peaks = extract_peak_locations(s.intensity_conditional, grid, s.d_hat);
    // Sorted so the moment blocks line up with locations_hat.
    s.locations_hat = peaks.peaks;
    std::sort(s.locations_hat.begin(), s.locations_hat.end());
    s.peak_shortfall = peaks.shortfall;
    s.moment_posterior = estimate_moments(model, s.locations_hat, y);
  }
  return s;
}

Discrepancy discrepancy(const DipoleConfig& truth, const PosteriorSummary& summary,
                        const SourceGrid& grid) {
  Discrepancy out;
  out.delta_d = static_cast<int>(summary.d_hat) - static_cast<int>(truth.size());
  if (!truth.empty() && !summary.locations_hat.empty()) {
    out.delta_c = delta_c(truth.indices(), summary.locations_hat, grid);
  } else {
    out.delta_c = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace sasmc
