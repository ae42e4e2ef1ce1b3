// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "sasmc/estimation.hpp"
#include "sasmc/experiments.hpp"
#include "sasmc/kernels.hpp"
#include "sasmc/smc.hpp"
#include "sasmc/weights.hpp"
#include "test_support.hpp"

using namespace sasmc;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

struct Instance {
  SemiLinearModel model;
  DipoleConfig config;
  Eigen::MatrixXd g;
  Eigen::MatrixXd y;
};

// Small random instances: N_s in [2, 8], four grid points, d in [0, 2], N_t in [1, 3].
std::vector<Instance> random_instances(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Instance> out;
  for (std::size_t n = 0; n < count; ++n) {
    const auto ns = static_cast<Eigen::Index>(2 + rng() % 7);
    const auto nt = static_cast<Eigen::Index>(1 + rng() % 3);
    const std::size_t d = rng() % 3;
    const double sigma_q = 0.5 + uniform01(rng);
    const double sigma_e = 0.8 + uniform01(rng);
    Instance inst;
    inst.model = testing::model_from_matrix(testing::random_matrix(ns, 12, rng), sigma_q, sigma_e, 0.25, 2);
    std::vector<GridIndex> idx{0, 1, 2, 3};
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(d);
    inst.config = DipoleConfig(idx);
    inst.g = assemble_lead_field(*inst.model.forward, inst.config);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd q(inst.g.cols(), nt);
    for (Eigen::Index k = 0; k < q.size(); ++k) q.data()[k] = sigma_q * normal(rng);
    inst.y = inst.g * q;
    for (Eigen::Index k = 0; k < inst.y.size(); ++k) inst.y.data()[k] += sigma_e * normal(rng);
    out.push_back(std::move(inst));
  }
  return out;
}

Verdict criterion1() {
  Verdict v;
  const auto start = Clock::now();
  double worst_dense = 0.0, worst_z = 0.0, sum_z2 = 0.0;
  int informative = 0, beyond = 0;
  const auto instances = random_instances(50, 101);
  for (std::size_t n = 0; n < instances.size(); ++n) {
    const Instance& inst = instances[n];
    // Independent Monte Carlo stream per instance.
    Rng mc_rng = make_stream(2024, n, 0);
    const double value = log_marginal_likelihood(inst.model, inst.config, inst.y);
    const double cached = MarginalLikelihood(inst.model, inst.y)(inst.config);
    const double dense = testing::dense_log_marginal(inst.g, inst.model.sigma_q, inst.model.sigma_e, inst.y);
    worst_dense = std::max({worst_dense, std::abs(value - dense) / std::abs(dense),
                            std::abs(cached - dense) / std::abs(dense)});
    const auto mc = testing::mc_log_marginal(inst.g, inst.model.sigma_q, inst.model.sigma_e, inst.y, 1'000'000, mc_rng);
    const double diff = std::abs(mc.log_mean - value);
    if (mc.log_se > 0.0) {
      const double z = diff / mc.log_se;
      worst_z = std::max(worst_z, z);
      sum_z2 += z * z;
      ++informative;
      beyond += z > 3.0;
    } else if (diff > 1e-9) {
      worst_z = 1e300;  // d = 0: every sample is exact
    }
  }
  const double elapsed = seconds_since(start);
  v.detail << "max rel err vs dense " << worst_dense << ", max MC |z| " << worst_z << " (" << beyond << " of "
           << informative << " instances beyond 3 SE, mean z^2 " << sum_z2 / std::max(informative, 1) << "), "
           << elapsed << " s";
  v.require(worst_dense <= 1e-9, "dense oracle 1e-9");
  v.require(worst_z <= 3.0, "Monte Carlo within 3 SE");
  v.require(elapsed < 60.0, "runtime < 1 min");
  return v;
}

Verdict criterion2() {
  Verdict v;
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& inst : random_instances(50, 101)) {
    if (inst.config.empty()) continue;
    ++checked;
    const auto post = conditional_moment_posterior(inst.model, inst.config, inst.y);
    const auto brute = testing::brute_conditional(inst.g, inst.model.sigma_q, inst.model.sigma_e, inst.y);
    const Eigen::Index m = inst.g.cols(), nt = inst.y.cols();
    Eigen::VectorXd mean(m * nt);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m * nt, m * nt);
    for (Eigen::Index t = 0; t < nt; ++t) {
      mean.segment(t * m, m) = post.means[static_cast<std::size_t>(t)];
      cov.block(t * m, t * m, m, m) = post.covariance;
    }
    worst = std::max({worst, testing::max_relative_error(mean, brute.mean),
                      testing::max_relative_error(cov, brute.covariance)});
  }
  v.detail << checked << " non-empty instances, max rel err " << worst;
  v.require(worst <= 1e-10, "brute-force conditioning 1e-10");
  return v;
}

Verdict criterion3() {
  Verdict v;
  const auto start = Clock::now();
  const auto problem = testing::make_tiny_problem();
  const MarginalLikelihood lik(problem.model, problem.y);
  const MoveNeighborhoods nb(problem.geometry.grid, KernelSettings{});
  const auto exact = testing::enumerate_posterior(problem.model, problem.y);
  v.require(exact.size() == 56, "56 configurations");
  int good = 0;
  double worst_d = 0.0, worst_r = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SmcSettings s;
    s.particle_count = 4000;
    s.master_seed = seed;
    const auto res = run_smc(lik, nb, KernelSettings{}, s);
    std::map<DipoleConfig, double> est;
    for (const auto& p : res.system.particles) est[p.config] += std::exp(p.log_weight);
    std::vector<double> exact_d(3, 0.0), est_d(3, 0.0), exact_r, est_r;
    for (const auto& [r, prob] : exact) {
      exact_d[r.size()] += prob;
      exact_r.push_back(prob);
      est_r.push_back(est.count(r) ? est.at(r) : 0.0);
      est_d[r.size()] += est_r.back();
    }
    const double tv_d = testing::total_variation(exact_d, est_d);
    const double tv_r = testing::total_variation(exact_r, est_r);
    worst_d = std::max(worst_d, tv_d);
    worst_r = std::max(worst_r, tv_r);
    good += tv_d < 0.05 && tv_r < 0.10;
  }
  const double elapsed = seconds_since(start);
  v.detail << good << "/20 runs within tolerance, worst TV_d " << worst_d << ", worst TV_r " << worst_r << ", "
           << elapsed << " s";
  v.require(good >= 18, ">= 18 of 20 runs");
  v.require(elapsed < 300.0, "runtime < 5 min");
  return v;
}

// Max over configurations of |(pi P)(r) - pi(r)|, plus the worst row-sum error.
std::pair<double, double> invariance_error(const std::map<DipoleConfig, double>& pi,
                                           const std::function<std::vector<Transition>(const DipoleConfig&)>& rows) {
  std::map<DipoleConfig, double> pushed;
  double row_err = 0.0;
  for (const auto& [from, p] : pi) {
    double total = 0.0;
    for (const auto& t : rows(from)) {
      if (!pi.count(t.to)) return {1e300, 1e300};
      pushed[t.to] += p * t.probability;
      total += t.probability;
    }
    row_err = std::max(row_err, std::abs(total - 1.0));
  }
  double worst = 0.0;
  for (const auto& [r, p] : pi) worst = std::max(worst, std::abs(pushed[r] - p));
  return {worst, row_err};
}

Verdict criterion4() {
  Verdict v;
  double worst = 0.0, worst_row = 0.0;
  int cases = 0;
  const Geometry tiny = testing::tiny_geometry();
  // Sub-grids of the ten-point lattice with six points or fewer, real semi-linear targets.
  const std::vector<std::vector<int>> subsets{{0, 1, 2, 3, 4}, {0, 1, 2, 5, 6, 7}, {1, 2, 3, 6}, {2, 3, 4, 7, 8, 9}};
  for (std::size_t si = 0; si < subsets.size(); ++si) {
    Geometry g;
    g.sensors = tiny.sensors;
    for (int k : subsets[si]) g.grid.points.push_back(tiny.grid.points[static_cast<std::size_t>(k)]);
    for (std::size_t d_max : {std::size_t{2}, std::size_t{3}}) {
      SemiLinearModel model;
      model.sigma_q = 1.0;
      model.poisson_lambda = 0.6;
      model.d_max = d_max;
      model.forward = std::make_shared<LeadField>(g.grid, g.sensors);
      Rng rng(17 + si);
      const Eigen::MatrixXd clean = assemble_lead_field(*model.forward, DipoleConfig{0, 2}) *
                                    testing::random_matrix(6, 2, rng);
      model.sigma_e = 0.3 * (1.0 + static_cast<double>(si)) * clean.cwiseAbs().maxCoeff();
      const Eigen::MatrixXd y = clean + model.sigma_e * testing::random_matrix(6, 2, rng);
      for (double alpha : {0.0, 0.37, 1.0}) {
        TemperedTarget target;
        target.alpha = alpha;
        target.evaluate = [&](std::span<const GridIndex> idx) {
          const DipoleConfig r(std::vector<GridIndex>(idx.begin(), idx.end()));
          return TargetValue{log_prior(model, r), log_marginal_likelihood(model, r, y)};
        };
        std::map<DipoleConfig, double> pi;
        double max_log = -1e300;
        std::map<DipoleConfig, double> logs;
        for (const auto& r : testing::all_configs(g.grid.size(), d_max)) {
          logs[r] = target.log_density(target.evaluate(r.indices()));
          max_log = std::max(max_log, logs[r]);
        }
        double total = 0.0;
        for (const auto& [r, l] : logs) total += pi[r] = std::exp(l - max_log);
        for (auto& [r, p] : pi) p /= total;

        const KernelSettings ks;
        const MoveNeighborhoods nb(g.grid, ks);
        const auto bd = invariance_error(pi, [&](const DipoleConfig& r) {
          return birth_death_transitions(r, target, g.grid.size(), d_max, ks);
        });
        const auto ls = invariance_error(pi, [&](const DipoleConfig& r) {
          return location_sweep_transitions(r, target, nb);
        });
        worst = std::max({worst, bd.first, ls.first});
        worst_row = std::max({worst_row, bd.second, ls.second});
        cases += 2;
      }
    }
  }
  v.detail << cases << " transition matrices, max |pi P - pi| " << worst << ", max row-sum error " << worst_row;
  v.require(worst <= 1e-12, "pi P = pi within 1e-12");
  v.require(worst_row <= 1e-12, "rows sum to one");
  return v;
}

ExperimentContext& default_context() {
  static ExperimentContext ctx = make_context(build_default_geometry(0));
  return ctx;
}

std::vector<Exp1GroupSummary>& experiment1_results(double* seconds = nullptr) {
  static double elapsed = 0.0;
  static std::vector<Exp1GroupSummary> results = [] {
    const auto start = Clock::now();
    Exp1Settings s;
    s.per_group = 20;
    s.groups = {0, 1};
    s.smc.particle_count = 1000;
    s.seed = 1;
    auto r = run_experiment1(default_context(), s);
    elapsed = seconds_since(start);
    return r;
  }();
  if (seconds) *seconds = elapsed;
  return results;
}

Verdict criterion5() {
  Verdict v;
  double elapsed = 0.0;
  const auto& groups = experiment1_results(&elapsed);
  for (const auto& g : groups) {
    v.detail << g.group.label << ": mean dd " << g.mean_delta_d << " (sd " << g.std_delta_d << "), mean dc "
             << g.mean_delta_c * 1e3 << " mm (sd " << g.std_delta_c * 1e3 << ", n " << g.delta_c_count << "); ";
    v.require(g.mean_delta_d >= -0.2 && g.mean_delta_d <= 0.2, g.group.label + " mean delta_d");
    v.require(g.delta_c_count > 0 && g.mean_delta_c < 5e-3, g.group.label + " mean delta_c < 5 mm");
  }
  v.detail << elapsed << " s";
  v.require(groups.size() == 2, "two groups");
  v.require(elapsed < 7200.0, "runtime < 2 h");
  return v;
}

Verdict criterion6() {
  Verdict v;
  const auto start = Clock::now();
  Exp2Settings s;
  s.runs = 50;
  s.smc.particle_count = 100;
  s.seed = 1;
  const auto result = run_experiment2(default_context(), s);
  const double elapsed = seconds_since(start);
  v.detail << result.report.above_threshold.size() << " grid points above threshold, semi-analytic not worse on "
           << 100.0 * result.report.fraction_semi_not_worse << "%, " << elapsed << " s";
  v.require(!result.report.above_threshold.empty(), "some grid point above threshold");
  v.require(result.report.fraction_semi_not_worse >= 0.8, "fraction >= 0.8");
  v.require(elapsed < 1800.0, "runtime < 30 min");
  return v;
}

Verdict criterion7() {
  Verdict v;
  const auto start = Clock::now();
  Exp3Settings s;
  s.lengths = {1, 30};
  s.repeats = 3;
  s.smc.particle_count = 1000;
  s.seed = 1;
  const auto result = run_experiment3(default_context(), s);
  const double elapsed = seconds_since(start);
  const auto& one = result.rows.at(0);
  const auto& thirty = result.rows.at(1);
  const double ratio = thirty.seconds / one.seconds;
  v.detail << "N_t=1: " << one.seconds << " s, " << one.iterations << " it, d " << one.d_hat << "; N_t=30: "
           << thirty.seconds << " s, " << thirty.iterations << " it, d " << thirty.d_hat << "; ratio " << ratio
           << ", total " << elapsed << " s";
  v.require(ratio <= 1.5, "time ratio <= 1.5");
  v.require(one.d_hat == 2 && thirty.d_hat == 2, "both runs find two dipoles");
  v.require(elapsed < 1800.0, "runtime < 30 min");
  return v;
}

Verdict criterion8() {
  Verdict v;
  const auto problem = testing::make_tiny_problem();
  const MarginalLikelihood lik(problem.model, problem.y);
  const MoveNeighborhoods nb(problem.geometry.grid, KernelSettings{});
  SmcSettings s;
  s.particle_count = 500;
  s.master_seed = 8;
  s.cache_audit_fraction = 1.0;
  double worst_sum = 0.0, min_ess = 1e300, max_ess = 0.0, prev_alpha = 0.0;
  bool resample_ess_ok = true, alpha_increasing = true;
  int resamples = 0;
  const auto a = run_smc(lik, nb, KernelSettings{}, s, [&](const ParticleSystem& sys, std::string_view phase) {
    double total = 0.0;
    for (const auto& p : sys.particles) total += std::exp(p.log_weight);
    worst_sum = std::max(worst_sum, std::abs(total - 1.0));
    min_ess = std::min(min_ess, sys.ess);
    max_ess = std::max(max_ess, sys.ess);
    if (phase == "resample") {
      ++resamples;
      resample_ess_ok = resample_ess_ok && sys.ess == 500.0;
    }
    if (phase == "reweight") {
      alpha_increasing = alpha_increasing && sys.alpha > prev_alpha;
      prev_alpha = sys.alpha;
    }
  });
  v.detail << "max |sum W - 1| " << worst_sum << ", ESS range [" << min_ess << ", " << max_ess << "], " << resamples
           << " resamples, " << a.trace.iterations.size() << " iterations";
  v.require(worst_sum <= 1e-8, "weights normalized");
  v.require(min_ess >= 1.0 && max_ess <= 500.0 * (1.0 + 1e-12), "ESS in [1, I]");
  v.require(resample_ess_ok, "ESS = I after resampling");
  v.require(alpha_increasing && a.system.alpha == 1.0 && a.trace.iterations.back().alpha == 1.0,
            "alphas strictly increase to exactly 1");

  const std::vector<double> x{-1000.0, -1001.5, -999.2, -1003.0};
  std::vector<double> shifted = x;
  for (double& e : shifted) e += 1234.5;
  const double lse = weights::log_sum_exp(x);
  v.require(std::abs(weights::log_sum_exp(shifted) - 1234.5 - lse) <= 1e-12 * std::abs(lse),
            "log-sum-exp shift invariance");

  s.cache_audit_fraction = 0.0;
  const auto b = run_smc(lik, nb, KernelSettings{}, s);
  s.workers = 4;
  const auto c = run_smc(lik, nb, KernelSettings{}, s);
  bool same = b.system.particles.size() == c.system.particles.size() &&
              b.trace.iterations.size() == c.trace.iterations.size();
  for (std::size_t i = 0; same && i < b.system.particles.size(); ++i) {
    same = b.system.particles[i].config == c.system.particles[i].config &&
           b.system.particles[i].log_weight == c.system.particles[i].log_weight;
  }
  for (std::size_t i = 0; same && i < b.trace.iterations.size(); ++i) {
    same = b.trace.iterations[i].alpha == c.trace.iterations[i].alpha;
  }
  v.require(same, "identical results for 1 and 4 workers");
  return v;
}

Verdict criterion9() {
  Verdict v;
  const auto& groups = experiment1_results();
  const auto& uncorrelated = groups.at(0);
  v.detail << uncorrelated.group.label << ": mean estimated strength over " << uncorrelated.noise_window_samples
           << " zero-strength samples " << uncorrelated.noise_window_strength;
  v.require(uncorrelated.noise_window_samples > 0, "noise-only samples exist");
  v.require(uncorrelated.noise_window_strength > 0.0, "mean strength > 0");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Verdict()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(n)) continue;
    Verdict v;
    try {
      v = criteria[i]();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "exception: " << e.what();
    }
    failures += !v.pass;
    std::cout << "criterion " << n << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail.str() << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
