#include "sasmc/full_smc.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <exception>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "sasmc/errors.hpp"
#include "sasmc/weights.hpp"

namespace sasmc {
namespace {

using Clock = std::chrono::steady_clock;
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double acceptance(double log_ratio) { return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio); }

std::vector<double> prior_by_count(const SemiLinearModel& model) {
  std::vector<double> out(model.d_max + 1);
  for (std::size_t d = 0; d <= model.d_max; ++d) {
    std::vector<GridIndex> indices(d);
    std::iota(indices.begin(), indices.end(), GridIndex{0});
    out[d] = log_prior(model, DipoleConfig(indices));
  }
  return out;
}

bool occupied_by(std::span<const GridIndex> tuple, std::size_t skip, GridIndex c) {
  for (std::size_t j = 0; j < tuple.size(); ++j) {
    if (j != skip && tuple[j] == c) return true;
  }
  return false;
}

double free_log_normalizer(std::span<const GridIndex> tuple, std::size_t k, GridIndex center,
                           const MoveNeighborhoods& neighborhoods) {
  double total = 0.0;
  for (const Neighbor& n : neighborhoods.of(center)) {
    if (!occupied_by(tuple, k, n.index)) total += std::exp(n.log_weight);
  }
  return std::log(total);
}

GridIndex nth_free_index(std::vector<GridIndex> occupied, std::size_t j) {
  std::sort(occupied.begin(), occupied.end());
  auto candidate = static_cast<GridIndex>(j);
  for (GridIndex c : occupied) {
    if (c <= candidate) {
      ++candidate;
    } else {
      break;
    }
  }
  return candidate;
}

Eigen::Vector3d draw_moment(double sigma, Rng& rng) {
  std::normal_distribution<double> normal(0.0, sigma);
  return Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
}

template <typename Body>
void parallel_for(std::size_t n, int workers, Body&& body) {
  std::exception_ptr error;
  const auto count = static_cast<long>(n);
#pragma omp parallel for num_threads(workers) schedule(static)
  for (long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(sasmc_full_parallel_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

FullLikelihood::FullLikelihood(SemiLinearModel model, Eigen::VectorXd y)
    : model_(std::move(model)), y_(std::move(y)) {
  model_.validate();
  if (y_.size() != model_.sensor_count()) throw ConfigError("FullLikelihood: data size mismatch");
  log_prior_by_count_ = prior_by_count(model_);
}

double FullLikelihood::operator()(std::span<const GridIndex> locations,
                                  const Eigen::VectorXd& moments) const {
  Eigen::VectorXd residual = y_;
  for (std::size_t k = 0; k < locations.size(); ++k) {
    residual.noalias() -= model_.forward->block(locations[k]) *
                          moments.segment<3>(3 * static_cast<Eigen::Index>(k));
  }
  const double sigma_e2 = model_.sigma_e * model_.sigma_e;
  const double n = static_cast<double>(y_.size());
  return -0.5 * n * (kLog2Pi + std::log(sigma_e2)) - 0.5 * residual.squaredNorm() / sigma_e2;
}

double log_moment_prior(const Eigen::VectorXd& q, double sigma_q) {
  const double n = static_cast<double>(q.size());
  return -0.5 * n * (kLog2Pi + 2.0 * std::log(sigma_q)) - 0.5 * q.squaredNorm() / (sigma_q * sigma_q);
}

BirthDeathResult full_birth_death_step(FullState& state, const FullLikelihood& likelihood, double alpha,
                                       const KernelSettings& settings, Rng& rng) {
  const SemiLinearModel& model = likelihood.model();
  const std::size_t d = state.locations.size();
  const std::size_t grid_size = model.grid_size();
  BirthDeathResult result;
  const double u = uniform01(rng);
  FullState proposal;
  double log_correction = 0.0;
  if (u < settings.p_birth) {
    if (d >= model.d_max || d >= grid_size) return result;
    const auto j = std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(grid_size - d)),
                            grid_size - d - 1);
    proposal.locations = state.locations;
    proposal.locations.push_back(nth_free_index(state.locations, j));
    proposal.moments.resize(static_cast<Eigen::Index>(3 * (d + 1)));
    proposal.moments.head(static_cast<Eigen::Index>(3 * d)) = state.moments;
    proposal.moments.tail<3>() = draw_moment(model.sigma_q, rng);
    // The new moment's prior density cancels against its proposal density.
    log_correction = std::log(settings.p_death / static_cast<double>(d + 1)) -
                     std::log(settings.p_birth / static_cast<double>(grid_size - d));
    result.move = MoveType::birth;
  } else if (u < settings.p_birth + settings.p_death) {
    if (d == 0) return result;
    const auto k = std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(d)), d - 1);
    proposal.locations = state.locations;
    proposal.locations.erase(proposal.locations.begin() + static_cast<std::ptrdiff_t>(k));
    proposal.moments.resize(static_cast<Eigen::Index>(3 * (d - 1)));
    const auto head = static_cast<Eigen::Index>(3 * k);
    proposal.moments.head(head) = state.moments.head(head);
    proposal.moments.tail(static_cast<Eigen::Index>(3 * (d - 1)) - head) =
        state.moments.tail(static_cast<Eigen::Index>(3 * (d - 1)) - head);
    log_correction = std::log(settings.p_birth / static_cast<double>(grid_size - d + 1)) -
                     std::log(settings.p_death / static_cast<double>(d));
    result.move = MoveType::death;
  } else {
    return result;
  }
  proposal.log_lik = likelihood(proposal.locations, proposal.moments);
  const double log_ratio = likelihood.log_prior(proposal.locations.size()) - likelihood.log_prior(d) +
                           alpha * (proposal.log_lik - state.log_lik) + log_correction;
  if (uniform01(rng) < acceptance(log_ratio)) {
    state = std::move(proposal);
    result.accepted = true;
  }
  return result;
}

LocationSweepResult full_location_sweep(FullState& state, const FullLikelihood& likelihood, double alpha,
                                        const MoveNeighborhoods& neighborhoods, Rng& rng) {
  LocationSweepResult result;
  const std::size_t d = state.locations.size();
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t k : order) {
    ++result.attempted;
    std::vector<GridIndex> candidates;
    std::vector<double> weights;
    double total = 0.0;
    for (const Neighbor& n : neighborhoods.of(state.locations[k])) {
      if (occupied_by(state.locations, k, n.index)) continue;
      candidates.push_back(n.index);
      weights.push_back(std::exp(n.log_weight));
      total += weights.back();
    }
    double u = uniform01(rng) * total;
    std::size_t pick = 0;
    while (pick + 1 < candidates.size() && u >= weights[pick]) u -= weights[pick++];
    const GridIndex from = state.locations[k];
    if (candidates[pick] == from) {
      ++result.accepted;
      continue;
    }
    state.locations[k] = candidates[pick];
    const double log_lik = likelihood(state.locations, state.moments);
    const double log_ratio = alpha * (log_lik - state.log_lik) + std::log(total) -
                             free_log_normalizer(state.locations, k, state.locations[k], neighborhoods);
    if (uniform01(rng) < acceptance(log_ratio)) {
      state.log_lik = log_lik;
      ++result.accepted;
    } else {
      state.locations[k] = from;
    }
  }
  return result;
}

LocationSweepResult moment_random_walk(FullState& state, const FullLikelihood& likelihood, double alpha,
                                       double step, Rng& rng) {
  LocationSweepResult result;
  const double sigma_q = likelihood.model().sigma_q;
  const double inv_two_var = 0.5 / (sigma_q * sigma_q);
  for (std::size_t k = 0; k < state.locations.size(); ++k) {
    ++result.attempted;
    const auto offset = static_cast<Eigen::Index>(3 * k);
    const Eigen::Vector3d old = state.moments.segment<3>(offset);
    const Eigen::Vector3d proposed = old + draw_moment(step, rng);
    state.moments.segment<3>(offset) = proposed;
    const double log_lik = likelihood(state.locations, state.moments);
    const double log_ratio = inv_two_var * (old.squaredNorm() - proposed.squaredNorm()) +
                             alpha * (log_lik - state.log_lik);
    if (uniform01(rng) < acceptance(log_ratio)) {
      state.log_lik = log_lik;
      ++result.accepted;
    } else {
      state.moments.segment<3>(offset) = old;
    }
  }
  return result;
}

FullSmcResult run_full(const FullLikelihood& likelihood, const MoveNeighborhoods& neighborhoods,
                       const KernelSettings& kernels, const SmcSettings& settings,
                       double moment_step_fraction) {
  settings.validate();
  kernels.validate();
  const SemiLinearModel& model = likelihood.model();
  if (neighborhoods.grid_size() != model.grid_size()) {
    throw ConfigError("run_full: neighborhoods and lead field disagree on grid size");
  }
  const auto run_start = Clock::now();
  const std::size_t n = settings.particle_count;
  const double log_uniform = -std::log(static_cast<double>(n));
  const std::vector<double> pmf = truncated_poisson_pmf(model.poisson_lambda, model.d_max);
  const double step = moment_step_fraction * model.sigma_q;

  FullSmcResult result;
  result.particles.resize(n);
  parallel_for(n, settings.workers, [&](std::size_t i) {
    Rng rng = make_stream(settings.master_seed, 0, i, stream_tag::init);
    double u = uniform01(rng);
    std::size_t d = 0;
    while (d + 1 < pmf.size() && u >= pmf[d]) u -= pmf[d++];
    FullState& s = result.particles[i].state;
    while (s.locations.size() < d) {
      const auto c = static_cast<GridIndex>(std::min(
          static_cast<std::size_t>(uniform01(rng) * static_cast<double>(model.grid_size())), model.grid_size() - 1));
      if (std::find(s.locations.begin(), s.locations.end(), c) == s.locations.end()) s.locations.push_back(c);
    }
    s.moments.resize(static_cast<Eigen::Index>(3 * d));
    for (std::size_t k = 0; k < d; ++k) s.moments.segment<3>(static_cast<Eigen::Index>(3 * k)) = draw_moment(model.sigma_q, rng);
    s.log_lik = likelihood(s.locations, s.moments);
    result.particles[i].log_weight = log_uniform;
  });

  std::vector<double> lw(n), ll(n);
  double ess = static_cast<double>(n);
  std::size_t iteration = 0;
  while (result.alpha < 1.0) {
    if (iteration >= settings.max_iterations) {
      std::ostringstream os;
      os << "run_full: no convergence after " << iteration << " iterations (alpha = " << result.alpha << ")";
      throw std::runtime_error(os.str());
    }
    const auto start = Clock::now();
    ++iteration;
    IterationRecord record;
    record.iteration = iteration;
    for (std::size_t i = 0; i < n; ++i) {
      lw[i] = result.particles[i].log_weight;
      ll[i] = result.particles[i].state.log_lik;
    }
    const AlphaProposal next = propose_next_alpha(lw, ll, result.alpha, ess, settings);
    record.bisection_warning = next.warning;
    if (next.warning) {
      std::ostringstream os;
      os << "iteration " << iteration << ": ESS band not reached, ratio " << next.ess_ratio;
      result.trace.warnings.push_back(os.str());
    }
    const double delta = next.alpha - result.alpha;
    for (std::size_t i = 0; i < n; ++i) lw[i] += delta * ll[i];
    weights::normalize(lw);
    ess = weights::effective_sample_size(lw);
    result.alpha = next.alpha;
    record.alpha = result.alpha;
    record.ess = ess;

    if (ess < settings.resample_threshold_fraction * static_cast<double>(n)) {
      Rng rng = make_stream(settings.master_seed, iteration, 0, stream_tag::resample);
      const auto parents = weights::systematic_resample(lw, uniform01(rng) / static_cast<double>(n));
      std::vector<FullParticle> next_particles;
      next_particles.reserve(n);
      for (std::size_t parent : parents) next_particles.push_back(result.particles[parent]);
      result.particles = std::move(next_particles);
      std::fill(lw.begin(), lw.end(), log_uniform);
      ess = static_cast<double>(n);
      record.resampled = true;
    }
    for (std::size_t i = 0; i < n; ++i) result.particles[i].log_weight = lw[i];

    std::vector<std::array<std::size_t, 6>> counts(n);
    const double alpha = result.alpha;
    parallel_for(n, settings.workers, [&](std::size_t i) {
      Rng rng = make_stream(settings.master_seed, iteration, i, stream_tag::kernel);
      FullState& s = result.particles[i].state;
      auto& c = counts[i];
      c.fill(0);
      for (int sweep = 0; sweep < settings.kernel_sweeps_per_iteration; ++sweep) {
        const BirthDeathResult bd = full_birth_death_step(s, likelihood, alpha, kernels, rng);
        if (bd.move == MoveType::birth) {
          ++c[0];
          c[1] += bd.accepted;
        } else if (bd.move == MoveType::death) {
          ++c[2];
          c[3] += bd.accepted;
        }
        const LocationSweepResult ls = full_location_sweep(s, likelihood, alpha, neighborhoods, rng);
        const LocationSweepResult mw = moment_random_walk(s, likelihood, alpha, step, rng);
        c[4] += ls.attempted + mw.attempted;
        c[5] += ls.accepted + mw.accepted;
      }
    });
    std::array<std::size_t, 6> total{};
    for (const auto& c : counts) {
      for (std::size_t j = 0; j < total.size(); ++j) total[j] += c[j];
    }
    auto rate = [](std::size_t a, std::size_t p) { return p ? static_cast<double>(a) / static_cast<double>(p) : 0.0; };
    record.birth_accept_rate = rate(total[1], total[0]);
    record.death_accept_rate = rate(total[3], total[2]);
    record.move_accept_rate = rate(total[5], total[4]);
    record.millis = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    result.trace.iterations.push_back(record);
  }
  result.trace.total_seconds = std::chrono::duration<double>(Clock::now() - run_start).count();
  return result;
}

std::vector<double> dense_intensity(const std::vector<FullParticle>& particles, std::size_t grid_size) {
  std::vector<double> out(grid_size, 0.0);
  for (const FullParticle& p : particles) {
    const double w = std::exp(p.log_weight);
    for (GridIndex c : p.state.locations) out[static_cast<std::size_t>(c)] += w;
  }
  return out;
}

std::vector<double> dense_intensity(const ParticleSystem& system, std::size_t grid_size) {
  std::vector<double> out(grid_size, 0.0);
  for (const Particle& p : system.particles) {
    const double w = std::exp(p.log_weight);
    for (GridIndex c : p.config) out[static_cast<std::size_t>(c)] += w;
  }
  return out;
}

IntensityStdReport compare_intensity_std(const std::vector<std::vector<double>>& runs_full,
                                         const std::vector<std::vector<double>>& runs_semi,
                                         double threshold) {
  auto per_point_std = [](const std::vector<std::vector<double>>& runs) {
    std::vector<double> out;
    if (runs.empty()) return out;
    const std::size_t points = runs.front().size();
    out.assign(points, 0.0);
    if (runs.size() < 2) return out;
    const double count = static_cast<double>(runs.size());
    for (std::size_t c = 0; c < points; ++c) {
      double mean = 0.0;
      for (const auto& r : runs) mean += r[c];
      mean /= count;
      double ss = 0.0;
      for (const auto& r : runs) ss += (r[c] - mean) * (r[c] - mean);
      out[c] = std::sqrt(ss / (count - 1.0));
    }
    return out;
  };
  IntensityStdReport report;
  report.threshold = threshold;
  report.std_full = per_point_std(runs_full);
  report.std_semi = per_point_std(runs_semi);
  if (report.std_full.size() != report.std_semi.size()) {
    throw std::invalid_argument("compare_intensity_std: run sets disagree on grid size");
  }
  std::size_t not_worse = 0;
  for (std::size_t c = 0; c < report.std_full.size(); ++c) {
    if (report.std_full[c] > threshold || report.std_semi[c] > threshold) {
      report.above_threshold.push_back(static_cast<GridIndex>(c));
      not_worse += report.std_semi[c] <= report.std_full[c];
    }
  }
  report.fraction_semi_not_worse =
      report.above_threshold.empty() ? 1.0
                                     : static_cast<double>(not_worse) / static_cast<double>(report.above_threshold.size());
  report.passes = report.fraction_semi_not_worse >= 0.8;
  return report;
}

IntensityStdReport intensity_std_experiment(const SemiLinearModel& model, const Eigen::VectorXd& y,
                                            const MoveNeighborhoods& neighborhoods,
                                            const KernelSettings& kernels, const SmcSettings& settings,
                                            std::size_t runs, std::uint64_t seed, double threshold) {
  const MarginalLikelihood marginal(model, Eigen::MatrixXd(y));
  const FullLikelihood full(model, y);
  std::vector<std::vector<double>> runs_full, runs_semi;
  for (std::size_t l = 0; l < runs; ++l) {
    SmcSettings s = settings;
    s.master_seed = stream_seed(seed, l, 0, 0x6e7a);
    runs_semi.push_back(dense_intensity(run_smc(marginal, neighborhoods, kernels, s).system, model.grid_size()));
    runs_full.push_back(dense_intensity(run_full(full, neighborhoods, kernels, s).particles, model.grid_size()));
  }
  return compare_intensity_std(runs_full, runs_semi, threshold);
}

}  // namespace sasmc
