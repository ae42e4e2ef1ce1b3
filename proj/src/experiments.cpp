#include "sasmc/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "sasmc/errors.hpp"
#include "sasmc/rng.hpp"

namespace sasmc {

namespace {

// Seed tags, kept apart from the sampler's own stream tags.
constexpr std::uint64_t kTagExp1Data = 0x31;
constexpr std::uint64_t kTagExp1Smc = 0x32;
constexpr std::uint64_t kTagExp2Data = 0x35;
constexpr std::uint64_t kTagExp3Data = 0x33;
constexpr std::uint64_t kTagExp3Smc = 0x34;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return out;
}

GridIndex nearest_point(const SourceGrid& grid, const Vec3& z) {
  GridIndex best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const double d2 = (grid.points[c] - z).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<GridIndex>(c);
    }
  }
  return best;
}

void best_assignment(std::span<const GridIndex> small, std::span<const GridIndex> large, const SourceGrid& grid,
                     std::size_t k, std::vector<int>& current, std::vector<bool>& used, double cost,
                     double& best_cost, std::vector<int>& best) {
  if (cost >= best_cost) return;
  if (k == small.size()) {
    best_cost = cost;
    best = current;
    return;
  }
  const Vec3& z = grid.points[static_cast<std::size_t>(small[k])];
  for (std::size_t j = 0; j < large.size(); ++j) {
    if (used[j]) continue;
    used[j] = true;
    current[k] = static_cast<int>(j);
    best_assignment(small, large, grid, k + 1, current, used,
                    cost + (grid.points[static_cast<std::size_t>(large[j])] - z).norm(), best_cost, best);
    used[j] = false;
  }
}

}  // namespace

ExperimentContext make_context(Geometry geometry, const KernelSettings& kernels) {
  validate_geometry(geometry);
  kernels.validate();
  ExperimentContext ctx;
  ctx.geometry = std::move(geometry);
  ctx.lead_field = std::make_shared<LeadField>(ctx.geometry.grid, ctx.geometry.sensors);
  ctx.kernels = kernels;
  ctx.neighborhoods = std::make_shared<MoveNeighborhoods>(ctx.geometry.grid, kernels);
  return ctx;
}

SemiLinearModel make_model(const ExperimentContext& ctx, double sigma_e, double sigma_q, double lambda,
                           std::size_t d_max) {
  SemiLinearModel m;
  m.sigma_e = sigma_e;
  m.sigma_q = sigma_q;
  m.poisson_lambda = lambda;
  m.d_max = d_max;
  m.forward = ctx.lead_field;
  m.validate();
  return m;
}

AnalysisResult analyze(const ExperimentContext& ctx, const SemiLinearModel& model, const TimeSeriesData& y,
                       const SmcSettings& settings) {
  const auto t0 = std::chrono::steady_clock::now();
  const MarginalLikelihood likelihood(model, y);
  AnalysisResult out;
  out.smc = run_smc(likelihood, *ctx.neighborhoods, ctx.kernels, settings);
  out.summary = summarize(out.smc.system, model, y, ctx.geometry.grid);
  out.seconds = seconds_since(t0);
  return out;
}

std::vector<int> match_sources(std::span<const GridIndex> truth, std::span<const GridIndex> estimate,
                               const SourceGrid& grid) {
  std::vector<int> out(truth.size(), -1);
  if (truth.empty() || estimate.empty()) return out;
  const bool truth_smaller = truth.size() <= estimate.size();
  const auto small = truth_smaller ? truth : estimate;
  const auto large = truth_smaller ? estimate : truth;
  std::vector<int> current(small.size(), -1), best;
  std::vector<bool> used(large.size(), false);
  double best_cost = std::numeric_limits<double>::infinity();
  best_assignment(small, large, grid, 0, current, used, 0.0, best_cost, best);
  if (truth_smaller) return best;
  for (std::size_t k = 0; k < best.size(); ++k) out[static_cast<std::size_t>(best[k])] = static_cast<int>(k);
  return out;
}

std::vector<Exp1Group> experiment1_groups() {
  std::vector<Exp1Group> groups;
  for (int d = 2; d <= 4; ++d) {
    groups.push_back({std::to_string(d) + "-uncorrelated", d, false});
    groups.push_back({std::to_string(d) + "-correlated", d, true});
  }
  return groups;
}

std::vector<Exp1GroupSummary> run_experiment1(const ExperimentContext& ctx, const Exp1Settings& settings) {
  const auto all = experiment1_groups();
  std::vector<std::size_t> selected = settings.groups;
  if (selected.empty()) {
    for (std::size_t g = 0; g < all.size(); ++g) selected.push_back(g);
  }
  if (settings.per_group == 0) throw ConfigError("experiment 1: per_group must be positive");

  std::vector<Exp1GroupSummary> out;
  for (std::size_t g : selected) {
    if (g >= all.size()) throw ConfigError("experiment 1: group index out of range");
    const auto t0 = std::chrono::steady_clock::now();
    Exp1GroupSummary s;
    s.group = all[g];
    s.runs = settings.per_group;
    s.mean_true_strength = Eigen::MatrixXd::Zero(s.group.n_dipoles, settings.n_time);
    s.mean_estimated_strength = Eigen::MatrixXd::Zero(s.group.n_dipoles, settings.n_time);
    std::vector<double> dd, dc;
    double noise_sum = 0.0;

    for (std::size_t j = 0; j < settings.per_group; ++j) {
      ScenarioSpec spec;
      spec.n_dipoles = s.group.n_dipoles;
      spec.correlated = s.group.correlated;
      spec.n_time = settings.n_time;
      spec.noise_fraction = settings.noise_fraction;
      spec.noise_std = settings.noise_std;
      spec.seed = stream_seed(settings.seed, g, j, kTagExp1Data);
      const GroundTruth truth = generate(spec, ctx.geometry.grid, *ctx.lead_field);

      SmcSettings smc = settings.smc;
      smc.master_seed = stream_seed(settings.seed, g, j, kTagExp1Smc);
      const SemiLinearModel model = make_model(ctx, truth.noise_std);
      const AnalysisResult run = analyze(ctx, model, truth.noisy, smc);

      const Discrepancy disc = discrepancy(truth.config, run.summary, ctx.geometry.grid);
      dd.push_back(disc.delta_d);
      if (!std::isnan(disc.delta_c)) dc.push_back(disc.delta_c);

      // Rows are averaged in order of peak time so each row follows one bump across datasets.
      std::vector<Eigen::Index> by_peak(static_cast<std::size_t>(s.group.n_dipoles));
      std::iota(by_peak.begin(), by_peak.end(), Eigen::Index{0});
      std::vector<Eigen::Index> peak_time(by_peak.size());
      for (Eigen::Index k = 0; k < s.group.n_dipoles; ++k) truth.strengths.row(k).maxCoeff(&peak_time[static_cast<std::size_t>(k)]);
      std::stable_sort(by_peak.begin(), by_peak.end(), [&](Eigen::Index a, Eigen::Index b) {
        return peak_time[static_cast<std::size_t>(a)] < peak_time[static_cast<std::size_t>(b)];
      });
      Eigen::MatrixXd est;
      std::vector<int> match(by_peak.size(), -1);
      if (run.summary.moment_posterior) {
        est = moment_strengths(*run.summary.moment_posterior);
        match = match_sources(truth.config.indices(), run.summary.locations_hat, ctx.geometry.grid);
      }
      for (Eigen::Index row = 0; row < s.group.n_dipoles; ++row) {
        const Eigen::Index k = by_peak[static_cast<std::size_t>(row)];
        s.mean_true_strength.row(row) += truth.strengths.row(k);
        const int m = match[static_cast<std::size_t>(k)];
        if (m < 0) continue;
        s.mean_estimated_strength.row(row) += est.row(m);
        for (Eigen::Index t = 0; t < settings.n_time; ++t) {
          if (truth.strengths(k, t) == 0.0) {
            noise_sum += est(m, t);
            ++s.noise_window_samples;
          }
        }
      }
    }

    const double n = static_cast<double>(settings.per_group);
    s.mean_true_strength /= n;
    s.mean_estimated_strength /= n;
    const MeanStd d_stats = mean_std(dd);
    s.mean_delta_d = d_stats.mean;
    s.std_delta_d = d_stats.std;
    const MeanStd c_stats = mean_std(dc);
    s.delta_c_count = dc.size();
    s.mean_delta_c = c_stats.mean;
    s.std_delta_c = c_stats.std;
    s.noise_window_strength =
        s.noise_window_samples ? noise_sum / static_cast<double>(s.noise_window_samples) : 0.0;
    s.seconds = seconds_since(t0);
    out.push_back(std::move(s));
  }
  return out;
}

GroundTruth experiment2_dataset(const ExperimentContext& ctx, std::uint64_t seed, double noise_fraction) {
  const auto& grid = ctx.geometry.grid;
  const GridIndex deep = nearest_point(grid, Vec3(0.0, 0.0, 0.02));
  const GridIndex shallow = nearest_point(grid, Vec3(0.03, 0.0, 0.06));
  if (deep == shallow) throw ConfigError("experiment 2: grid too coarse to separate the two sources");

  GroundTruth truth;
  truth.config = DipoleConfig{deep, shallow};
  // Radial direction of both points lies in the x-z plane, so x and y are tangential at the
  // deep source and y is tangential at the shallow one.
  for (GridIndex c : truth.config) {
    truth.orientations.push_back(c == deep ? Vec3::UnitX() : Vec3::UnitY());
  }
  truth.strengths = Eigen::MatrixXd::Ones(2, 1);
  truth.clean = synthesize(*ctx.lead_field, truth.config, truth.orientations, truth.strengths);
  truth.noise_std = noise_fraction * truth.clean.cwiseAbs().maxCoeff();
  Rng rng(stream_seed(seed, 0, 0, kTagExp2Data));
  std::normal_distribution<double> normal(0.0, 1.0);
  truth.noisy = truth.clean;
  for (Eigen::Index i = 0; i < truth.noisy.size(); ++i) truth.noisy.data()[i] += truth.noise_std * normal(rng);
  return truth;
}

Exp2Result run_experiment2(const ExperimentContext& ctx, const Exp2Settings& settings) {
  const auto t0 = std::chrono::steady_clock::now();
  Exp2Result out;
  out.truth = experiment2_dataset(ctx, settings.seed, settings.noise_fraction);
  const SemiLinearModel model = make_model(ctx, out.truth.noise_std);
  out.report = intensity_std_experiment(model, out.truth.noisy.col(0), *ctx.neighborhoods, ctx.kernels,
                                        settings.smc, settings.runs, settings.seed, settings.threshold);
  out.seconds = seconds_since(t0);
  return out;
}

Exp3Result run_experiment3(const ExperimentContext& ctx, const Exp3Settings& settings) {
  if (settings.repeats < 1) throw ConfigError("experiment 3: repeats must be at least 1");
  ScenarioSpec spec;
  spec.n_dipoles = 2;
  spec.correlated = true;
  spec.n_time = 30;
  spec.seed = stream_seed(settings.seed, 0, 0, kTagExp3Data);
  Exp3Result out;
  out.truth = generate(spec, ctx.geometry.grid, *ctx.lead_field);
  const SemiLinearModel model = make_model(ctx, out.truth.noise_std);
  const auto windows = window(out.truth.noisy, settings.center, settings.lengths);

  SmcSettings smc = settings.smc;
  smc.master_seed = stream_seed(settings.seed, 0, 0, kTagExp3Smc);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    Exp3Row row;
    row.length = settings.lengths[i];
    std::vector<double> times;
    for (int r = 0; r < settings.repeats; ++r) {
      const AnalysisResult run = analyze(ctx, model, windows[i], smc);
      times.push_back(run.seconds);
      row.iterations = run.smc.trace.iterations.size();
      row.d_hat = run.summary.d_hat;
      row.delta_c = discrepancy(out.truth.config, run.summary, ctx.geometry.grid).delta_c;
    }
    std::sort(times.begin(), times.end());
    row.seconds = times[times.size() / 2];
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace sasmc
