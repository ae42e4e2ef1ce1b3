#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "sasmc/dipole_config.hpp"
#include "sasmc/forward.hpp"
#include "sasmc/semilinear.hpp"
#include "sasmc/smc.hpp"

namespace sasmc {

// Sparse grid-index -> expected dipole count.
using IntensityMap = std::map<GridIndex, double>;

struct PeakExtraction {
  std::vector<GridIndex> peaks;  // extraction order
  bool shortfall = false;        // fewer than d_hat separated peaks found
};

struct PosteriorSummary {
  std::vector<double> number_posterior;  // P(D = d | y), d = 0..d_max
  std::size_t d_hat = 0;
  IntensityMap intensity_conditional;    // particles with D = d_hat only
  IntensityMap intensity_unconditional;  // all particles
  std::vector<GridIndex> locations_hat;  // ascending; may be shorter than d_hat on shortfall
  bool peak_shortfall = false;
  std::optional<MomentPosterior> moment_posterior;  // empty when d_hat = 0
};

struct Discrepancy {
  int delta_d = 0;
  double delta_c = 0.0;  // meters
};

// Weighted configurations viewed without copying.
struct WeightedConfigs {
  std::span<const DipoleConfig> configs;
  std::span<const double> log_weights;  // normalized
};

std::vector<double> number_posterior(const WeightedConfigs& particles, std::size_t d_max);
std::vector<double> number_posterior(const ParticleSystem& system, std::size_t d_max);

// argmax, ties resolved toward the smaller count.
std::size_t mode_count(std::span<const double> number_posterior);

// Throws EstimationError if no particle has exactly d_hat dipoles.
IntensityMap conditional_intensity(const WeightedConfigs& particles, std::size_t d_hat);
IntensityMap conditional_intensity(const ParticleSystem& system, std::size_t d_hat);
IntensityMap unconditional_intensity(const WeightedConfigs& particles);
IntensityMap unconditional_intensity(const ParticleSystem& system);

// Greedy local-mode search: take the highest remaining grid point (ties to the
// lower index), suppress everything within `suppression_radius`, repeat.
PeakExtraction extract_peak_locations(const IntensityMap& intensity, const SourceGrid& grid,
                                      std::size_t d_hat, double suppression_radius = 0.02);

// Conditional posterior of the moments at the estimated configuration; empty
// when no dipole was estimated.
std::optional<MomentPosterior> estimate_moments(const SemiLinearModel& model,
                                                std::span<const GridIndex> locations,
                                                const TimeSeriesData& y);

// Norm of each estimated dipole's moment mean per time point, d x N_t.
Eigen::MatrixXd moment_strengths(const MomentPosterior& posterior);

int delta_d(const DipoleConfig& truth, std::span<const GridIndex> estimate);
// Mean distance under the best injective pairing of the smaller set into the
// larger (no cardinality penalty). Throws EstimationError for empty inputs.
double delta_c(std::span<const GridIndex> truth, std::span<const GridIndex> estimate,
               const SourceGrid& grid);

PosteriorSummary summarize(const ParticleSystem& system, const SemiLinearModel& model,
                           const TimeSeriesData& y, const SourceGrid& grid);

Discrepancy discrepancy(const DipoleConfig& truth, const PosteriorSummary& summary,
                        const SourceGrid& grid);

}  // namespace sasmc
