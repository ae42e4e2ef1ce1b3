#include "sasmc/smc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "sasmc/errors.hpp"
#include "sasmc/weights.hpp"

namespace sasmc {
namespace {

using Clock = std::chrono::steady_clock;

double millis_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

TemperedTarget make_target(const MarginalLikelihood& likelihood, double alpha) {
  const SemiLinearModel& model = likelihood.model();
  // log_prior depends on the configuration only through d.
  std::vector<double> prior_by_count(model.d_max + 1);
  for (std::size_t d = 0; d <= model.d_max; ++d) {
    std::vector<GridIndex> dummy(d);
    for (std::size_t k = 0; k < d; ++k) dummy[k] = static_cast<GridIndex>(k);
    prior_by_count[d] = log_prior(model, DipoleConfig(dummy));
  }
  TemperedTarget target;
  target.alpha = alpha;
  target.evaluate = [&likelihood, prior_by_count = std::move(prior_by_count)](
                        std::span<const GridIndex> indices) {
    return TargetValue{prior_by_count.at(indices.size()), likelihood.evaluate(indices)};
  };
  return target;
}

DipoleConfig sample_prior_config(const std::vector<double>& count_pmf, std::size_t grid_size,
                                 Rng& rng) {
  double u = uniform01(rng);
  std::size_t d = 0;
  while (d + 1 < count_pmf.size() && u >= count_pmf[d]) u -= count_pmf[d++];
  std::vector<GridIndex> chosen;
  chosen.reserve(d);
  while (chosen.size() < d) {
    const auto c = static_cast<GridIndex>(
        std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(grid_size)), grid_size - 1));
    if (std::find(chosen.begin(), chosen.end(), c) == chosen.end()) chosen.push_back(c);
  }
  return DipoleConfig(std::move(chosen));
}

// Runs body(i) for every particle on `workers` threads, rethrowing the first
// exception after the loop.
template <typename Body>
void parallel_for(std::size_t n, int workers, Body&& body) {
  std::exception_ptr error;
  const auto count = static_cast<long>(n);
#pragma omp parallel for num_threads(workers) schedule(static)
  for (long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(sasmc_parallel_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

void SmcSettings::validate() const {
  if (particle_count < 2) throw ConfigError("smc settings: particle_count must be at least 2");
  if (!(0.0 < ess_ratio_low && ess_ratio_low < ess_ratio_high && ess_ratio_high < 1.0)) {
    throw ConfigError("smc settings: need 0 < ess_ratio_low < ess_ratio_high < 1");
  }
  if (!(resample_threshold_fraction >= 0.0 && resample_threshold_fraction <= 1.0)) {
    throw ConfigError("smc settings: resample_threshold_fraction must lie in [0, 1]");
  }
  if (max_bisection_steps < 1) throw ConfigError("smc settings: max_bisection_steps must be >= 1");
  if (kernel_sweeps_per_iteration < 0) throw ConfigError("smc settings: negative kernel sweeps");
  if (workers < 1) throw ConfigError("smc settings: workers must be >= 1");
  if (cache_audit_fraction < 0.0 || cache_audit_fraction > 1.0) {
    throw ConfigError("smc settings: cache_audit_fraction must lie in [0, 1]");
  }
}

std::vector<double> ParticleSystem::log_weights() const {
  std::vector<double> out(particles.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = particles[i].log_weight;
  return out;
}

std::vector<double> ParticleSystem::log_likelihoods() const {
  std::vector<double> out(particles.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = particles[i].log_lik;
  return out;
}

ParticleSystem initialize(const MarginalLikelihood& likelihood, const SmcSettings& settings) {
  settings.validate();
  const SemiLinearModel& model = likelihood.model();
  const std::vector<double> pmf = truncated_poisson_pmf(model.poisson_lambda, model.d_max);
  const std::size_t n = settings.particle_count;
  const double log_uniform = -std::log(static_cast<double>(n));

  ParticleSystem system;
  system.particles.resize(n);
  parallel_for(n, settings.workers, [&](std::size_t i) {
    Rng rng = make_stream(settings.master_seed, 0, i, stream_tag::init);
    Particle& p = system.particles[i];
    p.config = sample_prior_config(pmf, model.grid_size(), rng);
    p.log_weight = log_uniform;
    p.log_lik = likelihood(p.config);
    p.log_prior = log_prior(model, p.config);
  });
  system.ess = static_cast<double>(n);
  return system;
}

AlphaProposal propose_next_alpha(std::span<const double> normalized_log_w,
                                 std::span<const double> log_lik, double alpha, double ess,
                                 const SmcSettings& settings) {
  if (!(alpha < 1.0)) throw std::invalid_argument("propose_next_alpha: alpha already equals 1");
  const double low = settings.ess_ratio_low;
  const double high = settings.ess_ratio_high;
  auto ratio = [&](double delta) { return weights::incremented_ess(normalized_log_w, log_lik, delta) / ess; };
  auto distance = [&](double r) { return r < low ? low - r : (r > high ? r - high : 0.0); };

  double hi = 1.0 - alpha;
  const double full = ratio(hi);
  if (full >= low) return {1.0, full, false};

  double lo = 0.0;
  AlphaProposal best{alpha + hi, full, true};
  double best_distance = distance(full);
  for (int step = 0; step < settings.max_bisection_steps; ++step) {
    const double mid = 0.5 * (lo + hi);
    const double r = ratio(mid);
    if (r >= low && r <= high) return {alpha + mid, r, false};
    if (distance(r) < best_distance && alpha + mid > alpha) {
      best = {alpha + mid, r, true};
      best_distance = distance(r);
    }
    if (r > high) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return best;
}

AlphaProposal propose_next_alpha(const ParticleSystem& system, const SmcSettings& settings) {
  const std::vector<double> lw = system.log_weights();
  const std::vector<double> ll = system.log_likelihoods();
  return propose_next_alpha(lw, ll, system.alpha, system.ess, settings);
}

void reweight(ParticleSystem& system, double new_alpha) {
  if (new_alpha < system.alpha) throw std::invalid_argument("reweight: alpha must not decrease");
  const double delta = new_alpha - system.alpha;
  std::vector<double> lw(system.particles.size());
  for (std::size_t i = 0; i < lw.size(); ++i) {
    lw[i] = system.particles[i].log_weight + delta * system.particles[i].log_lik;
  }
  system.log_evidence += weights::normalize(lw);
  for (std::size_t i = 0; i < lw.size(); ++i) system.particles[i].log_weight = lw[i];
  system.ess = weights::effective_sample_size(lw);
  system.alpha = new_alpha;
}

bool maybe_resample(ParticleSystem& system, const SmcSettings& settings) {
  const std::size_t n = system.particles.size();
  if (!(system.ess < settings.resample_threshold_fraction * static_cast<double>(n))) return false;
  Rng rng = make_stream(settings.master_seed, system.iteration, 0, stream_tag::resample);
  const double u = uniform01(rng) / static_cast<double>(n);
  const std::vector<std::size_t> parents = weights::systematic_resample(system.log_weights(), u);
  std::vector<Particle> next;
  next.reserve(n);
  const double log_uniform = -std::log(static_cast<double>(n));
  for (std::size_t parent : parents) {
    next.push_back(system.particles[parent]);
    next.back().log_weight = log_uniform;
  }
  system.particles = std::move(next);
  system.ess = static_cast<double>(n);
  return true;
}

SmcResult run_smc(const MarginalLikelihood& likelihood, const MoveNeighborhoods& neighborhoods,
                  const KernelSettings& kernels, const SmcSettings& settings,
                  const SmcObserver& observer) {
  settings.validate();
  kernels.validate();
  const auto run_start = Clock::now();
  const SemiLinearModel& model = likelihood.model();
  if (neighborhoods.grid_size() != model.grid_size()) {
    throw ConfigError("run_smc: neighborhoods and lead field disagree on grid size");
  }

  SmcResult result;
  ParticleSystem& system = result.system;
  system = initialize(likelihood, settings);
  const std::size_t n = system.particles.size();

  struct Counts {
    std::size_t births_proposed = 0, births_accepted = 0;
    std::size_t deaths_proposed = 0, deaths_accepted = 0;
    std::size_t moves_proposed = 0, moves_accepted = 0;
  };
  std::vector<Counts> counts(n);

  while (system.alpha < 1.0) {
    if (system.iteration >= settings.max_iterations) {
      std::ostringstream os;
      os << "run_smc: no convergence after " << system.iteration << " iterations (alpha = "
         << system.alpha << ")";
      throw std::runtime_error(os.str());
    }
    const auto start = Clock::now();
    ++system.iteration;
    IterationRecord record;
    record.iteration = system.iteration;

    const AlphaProposal next = propose_next_alpha(system, settings);
    if (next.warning) {
      record.bisection_warning = true;
      std::ostringstream os;
      os << "iteration " << system.iteration << ": ESS band not reached, ratio " << next.ess_ratio;
      result.trace.warnings.push_back(os.str());
    }
    reweight(system, next.alpha);
    record.alpha = system.alpha;
    record.ess = system.ess;
    if (observer) observer(system, "reweight");
    record.resampled = maybe_resample(system, settings);
    if (observer && record.resampled) observer(system, "resample");

    const TemperedTarget target = make_target(likelihood, system.alpha);
    std::fill(counts.begin(), counts.end(), Counts{});
    parallel_for(n, settings.workers, [&](std::size_t i) {
      Rng rng = make_stream(settings.master_seed, system.iteration, i, stream_tag::kernel);
      Particle& p = system.particles[i];
      KernelState state{std::move(p.config), {p.log_prior, p.log_lik}};
      Counts& c = counts[i];
      for (int sweep = 0; sweep < settings.kernel_sweeps_per_iteration; ++sweep) {
        const BirthDeathResult bd =
            birth_death_step(state, target, model.grid_size(), model.d_max, kernels, rng);
        if (bd.move == MoveType::birth) {
          ++c.births_proposed;
          c.births_accepted += bd.accepted;
        } else if (bd.move == MoveType::death) {
          ++c.deaths_proposed;
          c.deaths_accepted += bd.accepted;
        }
        const LocationSweepResult ls = location_sweep(state, target, neighborhoods, rng);
        c.moves_proposed += ls.attempted;
        c.moves_accepted += ls.accepted;
      }
      p.config = std::move(state.config);
      p.log_prior = state.value.log_prior;
      p.log_lik = state.value.log_lik;
    });

    if (settings.cache_audit_fraction > 0.0) {
      Rng rng = make_stream(settings.master_seed, system.iteration, 0, stream_tag::audit);
      const auto audits = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(settings.cache_audit_fraction * static_cast<double>(n))));
      for (std::size_t a = 0; a < audits; ++a) {
        const Particle& p = system.particles[std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)))];
        const double fresh = log_marginal_likelihood(model, p.config, likelihood.data());
        if (std::abs(fresh - p.log_lik) > 1e-9 * std::max(1.0, std::abs(fresh))) {
          throw std::logic_error("run_smc: cached log-likelihood out of date");
        }
      }
    }

    if (observer) observer(system, "mutate");
    Counts total;
    for (const Counts& c : counts) {
      total.births_proposed += c.births_proposed;
      total.births_accepted += c.births_accepted;
      total.deaths_proposed += c.deaths_proposed;
      total.deaths_accepted += c.deaths_accepted;
      total.moves_proposed += c.moves_proposed;
      total.moves_accepted += c.moves_accepted;
    }
    auto rate = [](std::size_t a, std::size_t p) { return p ? static_cast<double>(a) / static_cast<double>(p) : 0.0; };
    record.birth_accept_rate = rate(total.births_accepted, total.births_proposed);
    record.death_accept_rate = rate(total.deaths_accepted, total.deaths_proposed);
    record.move_accept_rate = rate(total.moves_accepted, total.moves_proposed);
    record.millis = millis_since(start);
    result.trace.iterations.push_back(record);
  }
  result.trace.total_seconds = millis_since(run_start) / 1000.0;
  return result;
}

}  // namespace sasmc
