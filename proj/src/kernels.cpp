#include "sasmc/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "sasmc/errors.hpp"

namespace sasmc {
namespace {

bool occupied_by(std::span<const GridIndex> tuple, std::size_t skip, GridIndex c) {
  for (std::size_t j = 0; j < tuple.size(); ++j) {
    if (j != skip && tuple[j] == c) return true;
  }
  return false;
}

// Proposal for moving position k of `tuple`: the free neighbors of tuple[k]
// with their normalized probabilities, plus log of the normalizer.
struct MoveProposal {
  std::vector<GridIndex> candidates;
  std::vector<double> probabilities;
  double log_normalizer = 0.0;
};

double free_log_normalizer(std::span<const GridIndex> tuple, std::size_t k, GridIndex center,
                           const MoveNeighborhoods& neighborhoods) {
  double total = 0.0;
  for (const Neighbor& n : neighborhoods.of(center)) {
    if (!occupied_by(tuple, k, n.index)) total += std::exp(n.log_weight);
  }
  return std::log(total);
}

MoveProposal move_proposal(std::span<const GridIndex> tuple, std::size_t k,
                           const MoveNeighborhoods& neighborhoods) {
  MoveProposal p;
  double total = 0.0;
  for (const Neighbor& n : neighborhoods.of(tuple[k])) {
    if (occupied_by(tuple, k, n.index)) continue;
    p.candidates.push_back(n.index);
    p.probabilities.push_back(std::exp(n.log_weight));
    total += p.probabilities.back();
  }
  for (double& q : p.probabilities) q /= total;
  p.log_normalizer = std::log(total);
  return p;
}

// log Hastings ratio of moving tuple[k] -> to, excluding the target ratio.
double move_log_correction(std::span<const GridIndex> moved, std::size_t k, double log_normalizer_from,
                           const MoveNeighborhoods& neighborhoods) {
  // Neighbor weights are symmetric in distance, so only the normalizers differ.
  return log_normalizer_from - free_log_normalizer(moved, k, moved[k], neighborhoods);
}

double birth_log_correction(std::size_t d, std::size_t grid_size, const KernelSettings& s) {
  // reverse: death of one of d+1 dipoles; forward: birth at one of N_C - d free points
  return std::log(s.p_death / static_cast<double>(d + 1)) -
         std::log(s.p_birth / static_cast<double>(grid_size - d));
}

double death_log_correction(std::size_t d, std::size_t grid_size, const KernelSettings& s) {
  return std::log(s.p_birth / static_cast<double>(grid_size - d + 1)) -
         std::log(s.p_death / static_cast<double>(d));
}

double acceptance(double log_ratio) { return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio); }

// The j-th grid index (0-based) not present in r.
GridIndex nth_free_index(const DipoleConfig& r, std::size_t j) {
  auto candidate = static_cast<GridIndex>(j);
  for (GridIndex occupied : r) {
    if (occupied <= candidate) {
      ++candidate;
    } else {
      break;
    }
  }
  return candidate;
}

std::vector<Transition> merge(std::map<DipoleConfig, double>& acc) {
  std::vector<Transition> out;
  out.reserve(acc.size());
  for (auto& [config, p] : acc) out.push_back({config, p});
  return out;
}

}  // namespace

void KernelSettings::validate() const {
  if (p_birth < 0.0 || p_death < 0.0 || p_birth + p_death > 1.0) {
    throw ConfigError("kernel settings: need p_birth, p_death >= 0 and p_birth + p_death <= 1");
  }
  if (!(move_radius > 0.0)) throw ConfigError("kernel settings: move_radius must be positive");
  if (!(move_sigma > 0.0)) throw ConfigError("kernel settings: move_sigma must be positive");
}

MoveNeighborhoods::MoveNeighborhoods(const SourceGrid& grid, const KernelSettings& settings) {
  settings.validate();
  // Lattice neighbors sit at exactly move_radius up to rounding.
  const double radius2 = settings.move_radius * settings.move_radius * (1.0 + 1e-9);
  const double inv_two_sigma2 = 1.0 / (2.0 * settings.move_sigma * settings.move_sigma);
  offsets_.reserve(grid.size() + 1);
  offsets_.push_back(0);
  for (std::size_t c = 0; c < grid.size(); ++c) {
    for (std::size_t other = 0; other < grid.size(); ++other) {
      const double dist2 = (grid.points[other] - grid.points[c]).squaredNorm();
      if (dist2 <= radius2) {
        entries_.push_back({static_cast<GridIndex>(other), -dist2 * inv_two_sigma2});
      }
    }
    offsets_.push_back(entries_.size());
  }
}

std::span<const Neighbor> MoveNeighborhoods::of(GridIndex c) const {
  const auto i = static_cast<std::size_t>(c);
  return std::span<const Neighbor>(entries_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

BirthDeathResult birth_death_step(KernelState& state, const TemperedTarget& target,
                                  std::size_t grid_size, std::size_t d_max,
                                  const KernelSettings& settings, Rng& rng) {
  const std::size_t d = state.config.size();
  const double u = uniform01(rng);
  BirthDeathResult result;
  DipoleConfig proposal;
  double log_correction = 0.0;
  if (u < settings.p_birth) {
    if (d >= d_max || d >= grid_size) return result;
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(grid_size - d));
    proposal = state.config.with(nth_free_index(state.config, std::min(j, grid_size - d - 1)));
    log_correction = birth_log_correction(d, grid_size, settings);
    result.move = MoveType::birth;
  } else if (u < settings.p_birth + settings.p_death) {
    if (d == 0) return result;
    const auto k = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(d));
    proposal = state.config.without(state.config[std::min(k, d - 1)]);
    log_correction = death_log_correction(d, grid_size, settings);
    result.move = MoveType::death;
  } else {
    return result;
  }
  const TargetValue value = target.evaluate(proposal.indices());
  const double log_ratio =
      target.log_density(value) - target.log_density(state.value) + log_correction;
  if (uniform01(rng) < acceptance(log_ratio)) {
    state.config = std::move(proposal);
    state.value = value;
    result.accepted = true;
  }
  return result;
}

LocationSweepResult location_sweep(KernelState& state, const TemperedTarget& target,
                                   const MoveNeighborhoods& neighborhoods, Rng& rng) {
  LocationSweepResult result;
  const std::size_t d = state.config.size();
  if (d == 0) return result;
  std::vector<GridIndex> tuple(state.config.begin(), state.config.end());
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  TargetValue current = state.value;
  bool changed = false;
  for (std::size_t k : order) {
    ++result.attempted;
    const MoveProposal proposal = move_proposal(tuple, k, neighborhoods);
    const double u = uniform01(rng);
    std::size_t pick = 0;
    double cumulative = proposal.probabilities[0];
    while (u >= cumulative && pick + 1 < proposal.candidates.size()) {
      cumulative += proposal.probabilities[++pick];
    }
    const GridIndex from = tuple[k];
    const GridIndex to = proposal.candidates[pick];
    if (to == from) {
      ++result.accepted;
      continue;
    }
    tuple[k] = to;
    const TargetValue value = target.evaluate(tuple);
    const double log_ratio = target.log_density(value) - target.log_density(current) +
                             move_log_correction(tuple, k, proposal.log_normalizer, neighborhoods);
    if (uniform01(rng) < acceptance(log_ratio)) {
      current = value;
      changed = true;
      ++result.accepted;
    } else {
      tuple[k] = from;
    }
  }
  if (changed) {
    state.config = DipoleConfig(std::move(tuple));
    state.value = current;
  }
  return result;
}

std::vector<Transition> birth_death_transitions(const DipoleConfig& from, const TemperedTarget& target,
                                                std::size_t grid_size, std::size_t d_max,
                                                const KernelSettings& settings) {
  std::map<DipoleConfig, double> acc;
  const std::size_t d = from.size();
  const double log_current = target.log_density(target.evaluate(from.indices()));
  double stay = 1.0;
  if (d < d_max && d < grid_size) {
    const double per = settings.p_birth / static_cast<double>(grid_size - d);
    for (std::size_t j = 0; j < grid_size - d; ++j) {
      DipoleConfig to = from.with(nth_free_index(from, j));
      const double a = acceptance(target.log_density(target.evaluate(to.indices())) - log_current +
                                  birth_log_correction(d, grid_size, settings));
      acc[to] += per * a;
      stay -= per * a;
    }
  }
  if (d > 0) {
    const double per = settings.p_death / static_cast<double>(d);
    for (GridIndex c : from) {
      DipoleConfig to = from.without(c);
      const double a = acceptance(target.log_density(target.evaluate(to.indices())) - log_current +
                                  death_log_correction(d, grid_size, settings));
      acc[to] += per * a;
      stay -= per * a;
    }
  }
  acc[from] += stay;
  return merge(acc);
}

std::vector<TupleTransition> single_dipole_move_transitions(std::span<const GridIndex> tuple,
                                                            std::size_t k,
                                                            const TemperedTarget& target,
                                                            const MoveNeighborhoods& neighborhoods) {
  std::vector<TupleTransition> out;
  std::vector<GridIndex> work(tuple.begin(), tuple.end());
  const double log_current = target.log_density(target.evaluate(work));
  const MoveProposal proposal = move_proposal(work, k, neighborhoods);
  double stay = 0.0;
  for (std::size_t i = 0; i < proposal.candidates.size(); ++i) {
    const double q = proposal.probabilities[i];
    if (proposal.candidates[i] == tuple[k]) {
      stay += q;
      continue;
    }
    work[k] = proposal.candidates[i];
    const double a = acceptance(target.log_density(target.evaluate(work)) - log_current +
                                move_log_correction(work, k, proposal.log_normalizer, neighborhoods));
    out.push_back({work, q * a});
    stay += q * (1.0 - a);
    work[k] = tuple[k];
  }
  out.push_back({work, stay});
  return out;
}

std::vector<Transition> location_sweep_transitions(const DipoleConfig& from,
                                                   const TemperedTarget& target,
                                                   const MoveNeighborhoods& neighborhoods) {
  std::map<DipoleConfig, double> acc;
  const std::size_t d = from.size();
  if (d == 0) {
    acc[from] = 1.0;
    return merge(acc);
  }
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  double permutations = 0.0;
  std::vector<std::vector<std::size_t>> orders;
  do {
    orders.push_back(order);
    permutations += 1.0;
  } while (std::next_permutation(order.begin(), order.end()));

  const std::vector<GridIndex> start(from.begin(), from.end());
  for (const auto& visit : orders) {
    // Distribution over tuples after each successive single move.
    std::map<std::vector<GridIndex>, double> dist{{start, 1.0 / permutations}};
    for (std::size_t k : visit) {
      std::map<std::vector<GridIndex>, double> next;
      for (const auto& [tuple, p] : dist) {
        for (const auto& t : single_dipole_move_transitions(tuple, k, target, neighborhoods)) {
          next[t.to] += p * t.probability;
        }
      }
      dist = std::move(next);
    }
    for (const auto& [tuple, p] : dist) acc[DipoleConfig(tuple)] += p;
  }
  return merge(acc);
}

}  // namespace sasmc
