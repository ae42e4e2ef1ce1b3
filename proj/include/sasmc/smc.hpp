#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <string>
#include <vector>

#include "sasmc/dipole_config.hpp"
#include "sasmc/kernels.hpp"
#include "sasmc/semilinear.hpp"

namespace sasmc {

struct SmcSettings {
  std::size_t particle_count = 1000;
  double ess_ratio_low = 0.90;
  double ess_ratio_high = 0.99;
  double resample_threshold_fraction = 0.5;
  int max_bisection_steps = 50;
  int kernel_sweeps_per_iteration = 1;
  std::size_t max_iterations = 10000;
  std::uint64_t master_seed = 0;
  int workers = 1;
  // Fraction of particles whose cached likelihood is recomputed from
  // scratch each iteration; a mismatch beyond 1e-9 throws.
  double cache_audit_fraction = 0.0;

  void validate() const;
};

struct Particle {
  DipoleConfig config;
  double log_weight = 0.0;  // normalized
  double log_lik = 0.0;     // log pi(y | config)
  double log_prior = 0.0;   // log pi(config)
};

struct ParticleSystem {
  std::vector<Particle> particles;
  double alpha = 0.0;
  std::size_t iteration = 0;
  double ess = 0.0;
  double log_evidence = 0.0;  // running estimate of log pi(y)

  std::vector<double> log_weights() const;
  std::vector<double> log_likelihoods() const;
};

struct IterationRecord {
  std::size_t iteration = 0;
  double alpha = 0.0;
  double ess = 0.0;  // after reweighting, before any resampling
  bool resampled = false;
  double birth_accept_rate = 0.0;
  double death_accept_rate = 0.0;
  double move_accept_rate = 0.0;
  double millis = 0.0;
  bool bisection_warning = false;
};

struct RunTrace {
  std::vector<IterationRecord> iterations;
  std::vector<std::string> warnings;
  double total_seconds = 0.0;
};

struct SmcResult {
  ParticleSystem system;
  RunTrace trace;
};

struct AlphaProposal {
  double alpha = 1.0;
  double ess_ratio = 1.0;
  bool warning = false;  // band not reached; closest ratio returned
};

// Draws I configurations from the prior, uniform weights, alpha = 0.
ParticleSystem initialize(const MarginalLikelihood& likelihood, const SmcSettings& settings);

// Next tempering exponent by bisection on the increment, targeting
// ESS(alpha') / ESS(alpha) inside [low, high]; alpha' = 1 is taken whenever
// its ratio is at least `low`. Requires system.alpha < 1.
AlphaProposal propose_next_alpha(const ParticleSystem& system, const SmcSettings& settings);
// Same rule on raw weight/likelihood vectors (shared with the full sampler).
AlphaProposal propose_next_alpha(std::span<const double> normalized_log_w,
                                 std::span<const double> log_lik, double alpha, double ess,
                                 const SmcSettings& settings);

// log w_i += (new_alpha - alpha) log_lik_i, renormalize, refresh ESS.
void reweight(ParticleSystem& system, double new_alpha);

// Systematic resampling when ESS < threshold * I. The single uniform is drawn
// from the stream of (master_seed, system.iteration). Returns true if
// resampling happened.
bool maybe_resample(ParticleSystem& system, const SmcSettings& settings);

// The adaptive tempered sampler over dipole configurations. Each iteration:
// choose alpha, reweight, maybe resample, then apply the birth/death and
// location kernels to every particle. Stops after the sweep at alpha = 1.
// Called after each barrier phase ("reweight", "resample", "mutate") with the current system.
using SmcObserver = std::function<void(const ParticleSystem&, std::string_view phase)>;

SmcResult run_smc(const MarginalLikelihood& likelihood, const MoveNeighborhoods& neighborhoods,
                  const KernelSettings& kernels, const SmcSettings& settings,
                  const SmcObserver& observer = {});

// Stream tags: distinct purposes at the same (iteration, item) never share a stream.
namespace stream_tag {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t kernel = 2;
inline constexpr std::uint64_t resample = 3;
inline constexpr std::uint64_t audit = 4;
}  // namespace stream_tag

}  // namespace sasmc
