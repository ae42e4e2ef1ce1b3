// sasmc: dataset generation, single analyses and the three simulation studies.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sasmc/errors.hpp"
#include "sasmc/experiments.hpp"
#include "sasmc/io.hpp"

namespace fs = std::filesystem;
using namespace sasmc;
using nlohmann::json;

namespace {

struct Common {
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out = "out";
  std::size_t particles = 0;  // 0 keeps the command default
  std::uint64_t geometry_seed = 0;
};

void add_common(CLI::App* cmd, Common& c, bool with_particles) {
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "output directory");
  if (with_particles) cmd->add_option("--particles", c.particles, "number of particles")->check(CLI::PositiveNumber);
}

Geometry default_geometry(std::uint64_t seed) { return build_default_geometry(seed); }

fs::path emit(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  io::write_text(p, text);
  std::cout << p.string() << "\n";
  return p;
}

int cmd_geometry(const Common& c) {
  emit(c.out, "geometry.json", io::geometry_to_json(default_geometry(c.seed)));
  return 0;
}

int cmd_simulate(const std::string& config, bool seed_given, const Common& c) {
  const std::string text = io::read_text(config);
  ScenarioSpec spec = io::scenario_from_json(text);
  if (seed_given) spec.seed = c.seed;
  const auto raw = json::parse(text);
  const std::uint64_t geometry_seed = raw.value("geometry_seed", std::uint64_t{0});
  const Geometry geometry = default_geometry(geometry_seed);
  const LeadField lead_field(geometry.grid, geometry.sensors);
  const GroundTruth truth = generate(spec, geometry.grid, lead_field);

  io::Dataset dataset{spec, geometry_seed, truth.noise_std, truth.noisy};
  emit(c.out, "dataset.json", io::dataset_to_json(dataset));
  emit(c.out, "truth.json", io::truth_to_json(truth));
  return 0;
}

int cmd_run(const std::string& config, const CLI::App& sub, const Common& c) {
  const fs::path config_path(config);
  io::RunConfig rc = io::run_config_from_json(io::read_text(config_path), config_path.parent_path());
  if (sub.count("--seed")) rc.smc.master_seed = c.seed;
  if (sub.count("--workers")) rc.smc.workers = c.workers;
  if (sub.count("--particles")) rc.smc.particle_count = c.particles;
  if (sub.count("--out")) rc.out = c.out;
  rc.validate();

  const io::Dataset dataset = io::dataset_from_json(io::read_text(rc.dataset));
  Geometry geometry = rc.geometry ? io::geometry_from_json(io::read_text(*rc.geometry))
                                  : default_geometry(dataset.geometry_seed);
  if (static_cast<std::size_t>(dataset.data.rows()) != geometry.sensors.size()) {
    throw ConfigError("dataset has " + std::to_string(dataset.data.rows()) + " sensors but the geometry has " +
                      std::to_string(geometry.sensors.size()));
  }
  const ExperimentContext ctx = make_context(std::move(geometry), rc.kernels);
  const SemiLinearModel model =
      make_model(ctx, rc.sigma_e.value_or(dataset.noise_std), rc.sigma_q, rc.poisson_lambda, rc.d_max);
  const std::string hash = io::fnv1a_hex(io::run_config_to_json(rc));

  const AnalysisResult result = analyze(ctx, model, dataset.data, rc.smc);
  emit(rc.out, "summary.json", io::summary_to_json(result.summary, ctx.geometry.grid, hash));
  emit(rc.out, "trace.csv", io::trace_csv(result.smc.trace, hash));
  if (rc.truth) {
    const GroundTruth truth = io::truth_from_json(io::read_text(*rc.truth));
    truth.config.validate(ctx.geometry.grid.size(), truth.config.size());
    emit(rc.out, "discrepancy.json",
         io::discrepancy_to_json(discrepancy(truth.config, result.summary, ctx.geometry.grid), hash));
  }
  for (const auto& w : result.smc.trace.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

SmcSettings smc_settings(const Common& c, std::size_t default_particles) {
  SmcSettings s;
  s.particle_count = c.particles ? c.particles : default_particles;
  s.workers = c.workers;
  s.master_seed = c.seed;
  return s;
}

std::string hash_of(json settings) { return io::fnv1a_hex(settings.dump()); }

int cmd_exp1(std::size_t runs, std::vector<std::size_t> groups, std::optional<double> noise_std, const Common& c) {
  Exp1Settings s;
  s.per_group = runs;
  s.groups = std::move(groups);
  s.noise_std = noise_std;
  s.smc = smc_settings(c, 1000);
  s.seed = c.seed;
  const std::string hash = hash_of({{"experiment", 1}, {"runs", runs}, {"groups", s.groups},
                                    {"noise_std", noise_std ? json(*noise_std) : json(nullptr)},
                                    {"particles", s.smc.particle_count}, {"seed", c.seed}, {"geometry_seed", c.geometry_seed}});
  const ExperimentContext ctx = make_context(default_geometry(c.geometry_seed));
  const auto result = run_experiment1(ctx, s);
  emit(c.out, "exp1.csv", io::exp1_csv(result, hash));
  emit(c.out, "exp1_strengths.csv", io::exp1_strengths_csv(result, hash));
  return 0;
}

int cmd_exp2(std::size_t runs, const Common& c) {
  Exp2Settings s;
  s.runs = runs;
  s.smc = smc_settings(c, 100);
  s.seed = c.seed;
  const std::string hash = hash_of({{"experiment", 2}, {"runs", runs}, {"particles", s.smc.particle_count},
                                    {"seed", c.seed}, {"geometry_seed", c.geometry_seed}});
  const ExperimentContext ctx = make_context(default_geometry(c.geometry_seed));
  const Exp2Result result = run_experiment2(ctx, s);
  emit(c.out, "exp2.csv", io::exp2_csv(result.report, ctx.geometry.grid, hash));
  const std::string verdict = io::exp2_verdict(result.report);
  emit(c.out, "exp2_verdict.txt", verdict + "\n");
  std::cout << verdict << "\n";
  return 0;
}

int cmd_exp3(std::vector<int> lengths, int repeats, const Common& c) {
  Exp3Settings s;
  s.lengths = std::move(lengths);
  s.repeats = repeats;
  s.smc = smc_settings(c, 1000);
  s.seed = c.seed;
  const std::string hash = hash_of({{"experiment", 3}, {"lengths", s.lengths}, {"repeats", repeats},
                                    {"particles", s.smc.particle_count}, {"seed", c.seed}, {"geometry_seed", c.geometry_seed}});
  const ExperimentContext ctx = make_context(default_geometry(c.geometry_seed));
  const Exp3Result result = run_experiment3(ctx, s);
  emit(c.out, "exp3.csv", io::exp3_csv(result.rows, hash));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-analytic SMC for multi-dipole MEG source estimation"};
  app.require_subcommand(1);
  Common c;

  auto* geometry = app.add_subcommand("geometry", "write the default source grid and sensor array");
  add_common(geometry, c, false);

  std::string config;
  auto* simulate = app.add_subcommand("simulate", "generate a dataset from a scenario JSON");
  simulate->add_option("--config", config, "scenario JSON")->required();
  add_common(simulate, c, false);

  auto* run = app.add_subcommand("run", "analyse one dataset");
  run->add_option("--config", config, "run config JSON")->required();
  add_common(run, c, true);

  std::size_t exp1_runs = 10;
  std::vector<std::size_t> exp1_groups;
  std::optional<double> exp1_noise_std;
  auto* exp1 = app.add_subcommand("exp1", "discrepancy study over six scenario groups");
  exp1->add_option("--runs", exp1_runs, "datasets per group")->check(CLI::PositiveNumber);
  exp1->add_option("--groups", exp1_groups, "group indices 0..5 (default all)");
  exp1->add_option("--noise-std", exp1_noise_std, "absolute noise std instead of 5% of peak");
  exp1->add_option("--geometry-seed", c.geometry_seed, "seed of the default geometry");
  add_common(exp1, c, true);

  std::size_t exp2_runs = 50;
  auto* exp2 = app.add_subcommand("exp2", "intensity variance: semi-analytic vs full SMC");
  exp2->add_option("--runs", exp2_runs, "independent runs of each sampler")->check(CLI::PositiveNumber);
  exp2->add_option("--geometry-seed", c.geometry_seed, "seed of the default geometry");
  add_common(exp2, c, true);

  std::vector<int> exp3_lengths{1, 5, 10, 20, 30};
  int exp3_repeats = 1;
  auto* exp3 = app.add_subcommand("exp3", "run time against window length");
  exp3->add_option("--lengths", exp3_lengths, "window lengths");
  exp3->add_option("--repeats", exp3_repeats, "timed repeats per window (median reported)")
      ->check(CLI::PositiveNumber);
  exp3->add_option("--geometry-seed", c.geometry_seed, "seed of the default geometry");
  add_common(exp3, c, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*geometry) return cmd_geometry(c);
    if (*simulate) return cmd_simulate(config, simulate->count("--seed") > 0, c);
    if (*run) return cmd_run(config, *run, c);
    if (*exp1) return cmd_exp1(exp1_runs, exp1_groups, exp1_noise_std, c);
    if (*exp2) return cmd_exp2(exp2_runs, c);
    if (*exp3) return cmd_exp3(exp3_lengths, exp3_repeats, c);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 3;
}
