#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sasmc/dipole_config.hpp"
#include "sasmc/forward.hpp"
#include "sasmc/semilinear.hpp"

namespace sasmc {

struct ScenarioSpec {
  int n_dipoles = 2;  // 2..4
  bool correlated = false;
  int n_time = 30;
  // Absolute noise std (tesla). When absent, noise_fraction times the peak
  // absolute value of the clean data is used.
  std::optional<double> noise_std;
  double noise_fraction = 0.05;
  double min_separation = 0.01;  // meters
  std::uint64_t seed = 0;
  std::vector<double> peak_strength;  // per dipole, model units; empty means all 1

  void validate() const;
};

struct GroundTruth {
  DipoleConfig config;
  std::vector<Vec3> orientations;  // unit vectors, aligned with config order
  Eigen::MatrixXd strengths;       // d x N_t, aligned with config order
  TimeSeriesData clean;
  TimeSeriesData noisy;
  double noise_std = 0.0;

  // Moment vector (length 3d) at time t.
  Eigen::VectorXd moments(Eigen::Index t) const;
};

// Raised-cosine bump of unit peak over [start, start + length), zero outside.
Eigen::VectorXd raised_cosine_bump(int n_time, int start, int length);

// Strength time courses, one row per dipole: consecutive disjoint bumps when
// uncorrelated, one shared bump over the whole window when correlated.
Eigen::MatrixXd time_courses(int n_dipoles, int n_time, bool correlated,
                             std::span<const double> peak_strength);

GroundTruth generate(const ScenarioSpec& spec, const SourceGrid& grid, const LeadField& lead_field);

// Forward-simulates fixed sources: data = G(r) q_t + noise.
TimeSeriesData synthesize(const LeadField& lead_field, const DipoleConfig& config,
                          const std::vector<Vec3>& orientations, const Eigen::MatrixXd& strengths);

// Centered column windows. A window of length L starts floor(L/2) columns
// before `center`. Throws std::out_of_range when a window does not fit.
std::vector<TimeSeriesData> window(const TimeSeriesData& data, int center, std::span<const int> lengths);

}  // namespace sasmc
