#pragma once

#include <span>
#include <vector>

#include "sasmc/kernels.hpp"
#include "sasmc/semilinear.hpp"
#include "sasmc/smc.hpp"

namespace sasmc {

/// Likelihood of the full (r, q) model for one time point:
/// log N(y; G(r) q, sigma_e^2 I).
class FullLikelihood {
public:
  FullLikelihood(SemiLinearModel model, Eigen::VectorXd y);

  double operator()(std::span<const GridIndex> locations, const Eigen::VectorXd& moments) const;
  const SemiLinearModel& model() const noexcept { return model_; }
  const Eigen::VectorXd& data() const noexcept { return y_; }
  // log pi(r) for any configuration with d dipoles.
  double log_prior(std::size_t d) const { return log_prior_by_count_.at(d); }

private:
  SemiLinearModel model_;
  Eigen::VectorXd y_;
  std::vector<double> log_prior_by_count_;
};

// Dipole locations in arbitrary order with their moments (3 per dipole).
struct FullState {
  std::vector<GridIndex> locations;
  Eigen::VectorXd moments;
  double log_lik = 0.0;

  DipoleConfig config() const { return DipoleConfig(locations); }
};

struct FullParticle {
  FullState state;
  double log_weight = 0.0;  // normalized
};

struct FullSmcResult {
  std::vector<FullParticle> particles;
  double alpha = 0.0;
  RunTrace trace;
};

// log N(q; 0, sigma_q^2 I).
double log_moment_prior(const Eigen::VectorXd& q, double sigma_q);

// Birth draws the new moment from its prior, so the acceptance ratio has the
// same discrete form as the marginalized kernel times the likelihood ratio.
BirthDeathResult full_birth_death_step(FullState& state, const FullLikelihood& likelihood, double alpha,
                                       const KernelSettings& settings, Rng& rng);
// Location moves with the moments carried along.
LocationSweepResult full_location_sweep(FullState& state, const FullLikelihood& likelihood, double alpha,
                                        const MoveNeighborhoods& neighborhoods, Rng& rng);
// Per-dipole Gaussian random walk on the moment, step std `step`.
LocationSweepResult moment_random_walk(FullState& state, const FullLikelihood& likelihood, double alpha,
                                       double step, Rng& rng);

// Tempered SMC on (r, q) for single-time-point data with the same adaptive
// exponent, ESS and resampling rules as run_smc.
FullSmcResult run_full(const FullLikelihood& likelihood, const MoveNeighborhoods& neighborhoods,
                       const KernelSettings& kernels, const SmcSettings& settings,
                       double moment_step_fraction = 0.1);

// Unconditional intensity of a full-SMC particle set, dense over the grid.
std::vector<double> dense_intensity(const std::vector<FullParticle>& particles, std::size_t grid_size);
// Same for a semi-analytic particle system.
std::vector<double> dense_intensity(const ParticleSystem& system, std::size_t grid_size);

struct IntensityStdReport {
  double threshold = 5e-3;
  std::vector<double> std_full;  // per grid point, across runs
  std::vector<double> std_semi;
  std::vector<GridIndex> above_threshold;  // either sampler's std > threshold
  double fraction_semi_not_worse = 1.0;    // over above_threshold
  bool passes = true;                      // fraction >= 0.8
};

// Per-grid sample standard deviation across runs (n - 1 denominator; zero for
// a single run) and the comparison over points above the threshold. Each
// inner vector is one run's dense intensity.
IntensityStdReport compare_intensity_std(const std::vector<std::vector<double>>& runs_full,
                                         const std::vector<std::vector<double>>& runs_semi,
                                         double threshold = 5e-3);

// `runs` independent runs of both samplers on the same single-time-point
// data; run l uses master seed stream_seed(seed, l, 0, 0x6e7a).
IntensityStdReport intensity_std_experiment(const SemiLinearModel& model, const Eigen::VectorXd& y,
                                            const MoveNeighborhoods& neighborhoods,
                                            const KernelSettings& kernels, const SmcSettings& settings,
                                            std::size_t runs, std::uint64_t seed,
                                            double threshold = 5e-3);

}  // namespace sasmc
