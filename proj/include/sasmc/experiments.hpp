#pragma once

// Drivers for the three simulation studies; shared by the CLI and the acceptance suite.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sasmc/estimation.hpp"
#include "sasmc/forward.hpp"
#include "sasmc/full_smc.hpp"
#include "sasmc/kernels.hpp"
#include "sasmc/semilinear.hpp"
#include "sasmc/simulator.hpp"
#include "sasmc/smc.hpp"

namespace sasmc {

struct ExperimentContext {
  Geometry geometry;
  std::shared_ptr<const LeadField> lead_field;
  KernelSettings kernels;
  std::shared_ptr<const MoveNeighborhoods> neighborhoods;
};

ExperimentContext make_context(Geometry geometry, const KernelSettings& kernels = {});

SemiLinearModel make_model(const ExperimentContext& ctx, double sigma_e, double sigma_q = 1.0,
                           double lambda = 0.25, std::size_t d_max = 10);

struct AnalysisResult {
  SmcResult smc;
  PosteriorSummary summary;
  double seconds = 0.0;
};

AnalysisResult analyze(const ExperimentContext& ctx, const SemiLinearModel& model, const TimeSeriesData& y,
                       const SmcSettings& settings);

// For each true source, the index of its partner in `estimate` (or -1), chosen to minimise
// the summed distance over all one-to-one pairings.
std::vector<int> match_sources(std::span<const GridIndex> truth, std::span<const GridIndex> estimate,
                               const SourceGrid& grid);

struct Exp1Group {
  std::string label;
  int n_dipoles = 2;
  bool correlated = false;
};

// 2, 3 and 4 dipoles, each uncorrelated then correlated.
std::vector<Exp1Group> experiment1_groups();

struct Exp1Settings {
  std::size_t per_group = 10;
  std::vector<std::size_t> groups;  // indices into experiment1_groups(); empty means all six
  SmcSettings smc;
  std::uint64_t seed = 0;
  int n_time = 30;
  double noise_fraction = 0.05;
  std::optional<double> noise_std;
};

struct Exp1GroupSummary {
  Exp1Group group;
  std::size_t runs = 0;
  double mean_delta_d = 0.0;
  double std_delta_d = 0.0;
  std::size_t delta_c_count = 0;  // runs where delta_c is defined
  double mean_delta_c = 0.0;      // meters
  double std_delta_c = 0.0;
  Eigen::MatrixXd mean_true_strength;       // n_dipoles x N_t
  Eigen::MatrixXd mean_estimated_strength;  // matched estimate, 0 when unmatched
  double noise_window_strength = 0.0;  // mean matched strength where the true strength is 0
  std::size_t noise_window_samples = 0;
  double seconds = 0.0;
};

std::vector<Exp1GroupSummary> run_experiment1(const ExperimentContext& ctx, const Exp1Settings& settings);

struct Exp2Settings {
  std::size_t runs = 50;
  SmcSettings smc;  // particle_count is I for both samplers
  std::uint64_t seed = 0;
  double noise_fraction = 0.05;
  double threshold = 5e-3;
};

struct Exp2Result {
  GroundTruth truth;
  IntensityStdReport report;
  double seconds = 0.0;
};

// One deep and one shallow source, unit strength, tangential axis-aligned moments, one time point.
GroundTruth experiment2_dataset(const ExperimentContext& ctx, std::uint64_t seed, double noise_fraction);

Exp2Result run_experiment2(const ExperimentContext& ctx, const Exp2Settings& settings);

struct Exp3Settings {
  std::vector<int> lengths{1, 5, 10, 20, 30};
  int center = 15;
  SmcSettings smc;
  std::uint64_t seed = 0;
  int repeats = 1;  // reported time is the median over repeats
};

struct Exp3Row {
  int length = 0;
  double seconds = 0.0;
  std::size_t iterations = 0;
  std::size_t d_hat = 0;
  double delta_c = 0.0;
};

struct Exp3Result {
  GroundTruth truth;
  std::vector<Exp3Row> rows;
};

Exp3Result run_experiment3(const ExperimentContext& ctx, const Exp3Settings& settings);

}  // namespace sasmc
