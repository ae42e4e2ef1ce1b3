#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sasmc/dipole_config.hpp"
#include "sasmc/forward.hpp"
#include "sasmc/rng.hpp"

namespace sasmc {

struct KernelSettings {
  double p_birth = 1.0 / 3.0;
  double p_death = 1.0 / 20.0;
  double move_radius = 0.01;  // meters
  double move_sigma = 0.006;  // meters

  void validate() const;
};

// The two pieces of an unnormalized tempered log-target.
struct TargetValue {
  double log_prior = 0.0;
  double log_lik = 0.0;
};

/// log pi(r) + alpha log pi(y|r). The evaluator receives the dipole indices in
/// arbitrary order and must be symmetric in them.
struct TemperedTarget {
  std::function<TargetValue(std::span<const GridIndex>)> evaluate;
  double alpha = 1.0;

  double log_density(const TargetValue& v) const { return v.log_prior + alpha * v.log_lik; }
};

// A configuration together with its target evaluation, so kernels never
// re-evaluate the current state.
struct KernelState {
  DipoleConfig config;
  TargetValue value;
};

enum class MoveType { none, birth, death };

struct BirthDeathResult {
  bool accepted = false;
  MoveType move = MoveType::none;
};

struct LocationSweepResult {
  std::size_t accepted = 0;
  std::size_t attempted = 0;
};

struct Neighbor {
  GridIndex index;
  double log_weight;  // -|z(c') - z(c)|^2 / (2 sigma^2)
};

/// For every grid point, the grid points within move_radius (itself
/// included) with their unnormalized Gaussian proposal weights.
class MoveNeighborhoods {
public:
  MoveNeighborhoods(const SourceGrid& grid, const KernelSettings& settings);

  std::span<const Neighbor> of(GridIndex c) const;
  std::size_t grid_size() const noexcept { return offsets_.size() - 1; }

private:
  std::vector<std::size_t> offsets_;
  std::vector<Neighbor> entries_;
};

// Reversible-jump birth/death move on the dipole count. A birth at d = d_max
// or a death at d = 0 counts as no proposal.
BirthDeathResult birth_death_step(KernelState& state, const TemperedTarget& target,
                                  std::size_t grid_size, std::size_t d_max,
                                  const KernelSettings& settings, Rng& rng);

// One Metropolis-Hastings location move per dipole. Dipoles are visited in a
// uniformly random order and each move sees the earlier accepted ones.
LocationSweepResult location_sweep(KernelState& state, const TemperedTarget& target,
                                   const MoveNeighborhoods& neighborhoods, Rng& rng);

/// Exact one-step transition distributions, built from the same proposal
/// and acceptance rules as the samplers above. Entries with equal `to` are
/// merged; probabilities sum to one.
struct Transition {
  DipoleConfig to;
  double probability;
};

std::vector<Transition> birth_death_transitions(const DipoleConfig& from, const TemperedTarget& target,
                                                std::size_t grid_size, std::size_t d_max,
                                                const KernelSettings& settings);
std::vector<Transition> location_sweep_transitions(const DipoleConfig& from,
                                                   const TemperedTarget& target,
                                                   const MoveNeighborhoods& neighborhoods);

// Single move of position `k` of an ordered dipole tuple.
struct TupleTransition {
  std::vector<GridIndex> to;
  double probability;
};
std::vector<TupleTransition> single_dipole_move_transitions(std::span<const GridIndex> tuple,
                                                            std::size_t k,
                                                            const TemperedTarget& target,
                                                            const MoveNeighborhoods& neighborhoods);

}  // namespace sasmc
