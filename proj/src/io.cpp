#include "sasmc/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "sasmc/errors.hpp"

namespace sasmc::io {

using nlohmann::json;

namespace {

json parse(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(what) + ": malformed JSON: " + e.what());
  }
}

template <class T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T field_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  return field<T>(j, key);
}

void check_schema(const json& j, std::string_view kind) {
  const int version = field<int>(j, "schema_version");
  if (version != kSchemaVersion) {
    throw ConfigError(std::string(kind) + ": unsupported schema_version " + std::to_string(version));
  }
  if (j.contains("kind") && field<std::string>(j, "kind") != kind) {
    throw ConfigError("expected a '" + std::string(kind) + "' document, found '" + field<std::string>(j, "kind") + "'");
  }
}

json header(std::string_view kind) { return json{{"schema_version", kSchemaVersion}, {"kind", kind}}; }

json points_json(const std::vector<Vec3>& points) {
  json out = json::array();
  for (const Vec3& p : points) out.push_back({p.x(), p.y(), p.z()});
  return out;
}

std::vector<Vec3> points_from(const json& j, const char* key) {
  const auto raw = field<std::vector<std::vector<double>>>(j, key);
  std::vector<Vec3> out;
  for (const auto& p : raw) {
    if (p.size() != 3) throw ConfigError(std::string("field '") + key + "': points need 3 coordinates");
    out.emplace_back(p[0], p[1], p[2]);
  }
  return out;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& j, const char* key, Eigen::Index rows, Eigen::Index cols) {
  const auto raw = field<std::vector<std::vector<double>>>(j, key);
  if (static_cast<Eigen::Index>(raw.size()) != rows) {
    throw ConfigError(std::string("field '") + key + "': expected " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(raw[static_cast<std::size_t>(i)].size()) != cols) {
      throw ConfigError(std::string("field '") + key + "': expected " + std::to_string(cols) + " columns");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = raw[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
  }
  return m;
}

json scenario_json(const ScenarioSpec& spec) {
  json j{{"n_dipoles", spec.n_dipoles},
         {"correlated", spec.correlated},
         {"n_time", spec.n_time},
         {"noise_fraction", spec.noise_fraction},
         {"min_separation", spec.min_separation},
         {"seed", spec.seed},
         {"peak_strength", spec.peak_strength}};
  j["noise_std"] = spec.noise_std ? json(*spec.noise_std) : json(nullptr);
  return j;
}

ScenarioSpec scenario_from(const json& j) {
  ScenarioSpec s;
  s.n_dipoles = field<int>(j, "n_dipoles");
  s.correlated = field<bool>(j, "correlated");
  s.n_time = field<int>(j, "n_time");
  s.noise_fraction = field_or<double>(j, "noise_fraction", s.noise_fraction);
  s.min_separation = field_or<double>(j, "min_separation", s.min_separation);
  s.seed = field_or<std::uint64_t>(j, "seed", s.seed);
  s.peak_strength = field_or<std::vector<double>>(j, "peak_strength", {});
  if (j.contains("noise_std") && !j.at("noise_std").is_null()) s.noise_std = field<double>(j, "noise_std");
  s.validate();
  return s;
}

std::string csv_header(std::string_view hash, std::string_view columns) {
  std::ostringstream out;
  out << "# schema_version " << kSchemaVersion << "\n# config_hash " << hash << "\n" << columns << "\n";
  return out.str();
}

std::ostringstream csv_stream() {
  std::ostringstream out;
  out << std::setprecision(12);
  return out;
}

json intensity_json(const IntensityMap& m) {
  json out = json::array();
  for (const auto& [c, v] : m) {
    if (v > 0.0) out.push_back({{"index", c}, {"value", v}});
  }
  return out;
}

}  // namespace

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string geometry_to_json(const Geometry& geometry) {
  json j = header("geometry");
  j["spacing"] = geometry.grid.spacing;
  j["grid"] = points_json(geometry.grid.points);
  j["sensors"] = points_json(geometry.sensors.positions);
  return j.dump() + "\n";
}

Geometry geometry_from_json(std::string_view text) {
  const json j = parse(text, "geometry");
  check_schema(j, "geometry");
  Geometry g;
  g.grid.spacing = field_or<double>(j, "spacing", g.grid.spacing);
  g.grid.points = points_from(j, "grid");
  g.sensors.positions = points_from(j, "sensors");
  validate_geometry(g);
  return g;
}

std::string scenario_to_json(const ScenarioSpec& spec) {
  json j = header("scenario");
  j.update(scenario_json(spec));
  return j.dump(2) + "\n";
}

ScenarioSpec scenario_from_json(std::string_view text) {
  const json j = parse(text, "scenario");
  if (j.contains("schema_version")) check_schema(j, "scenario");
  return scenario_from(j);
}

std::string dataset_to_json(const Dataset& dataset) {
  json j = header("dataset");
  j["spec"] = scenario_json(dataset.spec);
  j["geometry_seed"] = dataset.geometry_seed;
  j["noise_std"] = dataset.noise_std;
  j["n_sensors"] = dataset.data.rows();
  j["n_time"] = dataset.data.cols();
  j["data"] = matrix_json(dataset.data);
  return j.dump() + "\n";
}

Dataset dataset_from_json(std::string_view text) {
  const json j = parse(text, "dataset");
  check_schema(j, "dataset");
  Dataset d;
  d.spec = scenario_from(field<json>(j, "spec"));
  d.geometry_seed = field_or<std::uint64_t>(j, "geometry_seed", 0);
  d.noise_std = field<double>(j, "noise_std");
  const auto ns = field<Eigen::Index>(j, "n_sensors");
  const auto nt = field<Eigen::Index>(j, "n_time");
  if (ns <= 0 || nt <= 0) throw ConfigError("dataset: n_sensors and n_time must be positive");
  d.data = matrix_from(j, "data", ns, nt);
  return d;
}

std::string truth_to_json(const GroundTruth& truth) {
  json j = header("ground_truth");
  j["config"] = std::vector<GridIndex>(truth.config.begin(), truth.config.end());
  j["orientations"] = points_json(truth.orientations);
  j["strengths"] = matrix_json(truth.strengths);
  j["noise_std"] = truth.noise_std;
  j["clean"] = matrix_json(truth.clean);
  return j.dump() + "\n";
}

GroundTruth truth_from_json(std::string_view text) {
  const json j = parse(text, "ground truth");
  check_schema(j, "ground_truth");
  GroundTruth t;
  t.config = DipoleConfig(field<std::vector<GridIndex>>(j, "config"));
  t.orientations = points_from(j, "orientations");
  const auto d = static_cast<Eigen::Index>(t.config.size());
  if (static_cast<Eigen::Index>(t.orientations.size()) != d) {
    throw ConfigError("ground truth: orientations do not match config size");
  }
  const auto strengths = field<std::vector<std::vector<double>>>(j, "strengths");
  const Eigen::Index nt = strengths.empty() ? 0 : static_cast<Eigen::Index>(strengths.front().size());
  t.strengths = matrix_from(j, "strengths", d, nt);
  t.noise_std = field<double>(j, "noise_std");
  const auto clean = field<std::vector<std::vector<double>>>(j, "clean");
  t.clean = matrix_from(j, "clean", static_cast<Eigen::Index>(clean.size()), nt);
  return t;
}

void RunConfig::validate() const {
  if (dataset.empty()) throw ConfigError("run config: missing field 'dataset'");
  if (!(sigma_q > 0.0)) throw ConfigError("run config: sigma_q must be positive");
  if (sigma_e && !(*sigma_e > 0.0)) throw ConfigError("run config: sigma_e must be positive");
  if (!(poisson_lambda > 0.0)) throw ConfigError("run config: lambda must be positive");
  if (d_max < 1) throw ConfigError("run config: d_max must be at least 1");
  smc.validate();
  kernels.validate();
}

RunConfig run_config_from_json(std::string_view text, const std::filesystem::path& base_dir) {
  const json j = parse(text, "run config");
  if (j.contains("schema_version")) check_schema(j, "run_config");
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  RunConfig c;
  c.dataset = resolve(field<std::string>(j, "dataset"));
  if (j.contains("truth") && !j.at("truth").is_null()) c.truth = resolve(field<std::string>(j, "truth"));
  if (j.contains("geometry") && !j.at("geometry").is_null()) c.geometry = resolve(field<std::string>(j, "geometry"));
  c.out = resolve(field_or<std::string>(j, "out", "out"));

  const json model = field_or<json>(j, "model", json::object());
  c.sigma_q = field_or<double>(model, "sigma_q", c.sigma_q);
  if (model.contains("sigma_e") && !model.at("sigma_e").is_null()) c.sigma_e = field<double>(model, "sigma_e");
  c.poisson_lambda = field_or<double>(model, "lambda", c.poisson_lambda);
  c.d_max = field_or<std::size_t>(model, "d_max", c.d_max);

  const json smc = field_or<json>(j, "smc", json::object());
  c.smc.particle_count = field_or<std::size_t>(smc, "particles", c.smc.particle_count);
  c.smc.master_seed = field_or<std::uint64_t>(smc, "seed", c.smc.master_seed);
  c.smc.workers = field_or<int>(smc, "workers", c.smc.workers);
  c.smc.ess_ratio_low = field_or<double>(smc, "ess_ratio_low", c.smc.ess_ratio_low);
  c.smc.ess_ratio_high = field_or<double>(smc, "ess_ratio_high", c.smc.ess_ratio_high);
  c.smc.resample_threshold_fraction =
      field_or<double>(smc, "resample_threshold_fraction", c.smc.resample_threshold_fraction);
  c.smc.max_iterations = field_or<std::size_t>(smc, "max_iterations", c.smc.max_iterations);
  c.smc.kernel_sweeps_per_iteration =
      field_or<int>(smc, "kernel_sweeps_per_iteration", c.smc.kernel_sweeps_per_iteration);
  c.smc.cache_audit_fraction = field_or<double>(smc, "cache_audit_fraction", c.smc.cache_audit_fraction);

  const json k = field_or<json>(j, "kernels", json::object());
  c.kernels.p_birth = field_or<double>(k, "p_birth", c.kernels.p_birth);
  c.kernels.p_death = field_or<double>(k, "p_death", c.kernels.p_death);
  c.kernels.move_radius = field_or<double>(k, "move_radius", c.kernels.move_radius);
  c.kernels.move_sigma = field_or<double>(k, "move_sigma", c.kernels.move_sigma);
  return c;
}

std::string run_config_to_json(const RunConfig& c) {
  json j = header("run_config");
  j["dataset"] = c.dataset.string();
  j["truth"] = c.truth ? json(c.truth->string()) : json(nullptr);
  j["geometry"] = c.geometry ? json(c.geometry->string()) : json(nullptr);
  j["model"] = {{"sigma_q", c.sigma_q},
                {"sigma_e", c.sigma_e ? json(*c.sigma_e) : json(nullptr)},
                {"lambda", c.poisson_lambda},
                {"d_max", c.d_max}};
  j["smc"] = {{"particles", c.smc.particle_count},
              {"seed", c.smc.master_seed},
              {"ess_ratio_low", c.smc.ess_ratio_low},
              {"ess_ratio_high", c.smc.ess_ratio_high},
              {"resample_threshold_fraction", c.smc.resample_threshold_fraction},
              {"max_iterations", c.smc.max_iterations},
              {"kernel_sweeps_per_iteration", c.smc.kernel_sweeps_per_iteration},
              {"cache_audit_fraction", c.smc.cache_audit_fraction}};
  j["kernels"] = {{"p_birth", c.kernels.p_birth},
                  {"p_death", c.kernels.p_death},
                  {"move_radius", c.kernels.move_radius},
                  {"move_sigma", c.kernels.move_sigma}};
  return j.dump(2) + "\n";
}

std::string summary_to_json(const PosteriorSummary& s, const SourceGrid& grid, std::string_view hash) {
  json j = header("posterior_summary");
  j["config_hash"] = hash;
  j["number_posterior"] = s.number_posterior;
  j["d_hat"] = s.d_hat;
  j["peak_shortfall"] = s.peak_shortfall;
  json locations = json::array();
  for (GridIndex c : s.locations_hat) {
    const Vec3& z = grid.points.at(static_cast<std::size_t>(c));
    locations.push_back({{"index", c}, {"position", {z.x(), z.y(), z.z()}}});
  }
  j["locations"] = std::move(locations);
  j["intensity_conditional"] = intensity_json(s.intensity_conditional);
  j["intensity_unconditional"] = intensity_json(s.intensity_unconditional);
  if (s.moment_posterior) {
    json means = json::array();
    for (const auto& m : s.moment_posterior->means) means.push_back(std::vector<double>(m.begin(), m.end()));
    j["moments"] = {{"means", std::move(means)}, {"covariance", matrix_json(s.moment_posterior->covariance)}};
  } else {
    j["moments"] = nullptr;
  }
  return j.dump(2) + "\n";
}

std::string discrepancy_to_json(const Discrepancy& d, std::string_view hash) {
  json j = header("discrepancy");
  j["config_hash"] = hash;
  j["delta_d"] = d.delta_d;
  // NaN (no locations to compare) is written as null.
  j["delta_c"] = std::isnan(d.delta_c) ? json(nullptr) : json(d.delta_c);
  return j.dump(2) + "\n";
}

std::string trace_csv(const RunTrace& trace, std::string_view hash) {
  auto out = csv_stream();
  out << csv_header(hash, "iteration,alpha,ess,resampled,birth_accept,death_accept,move_accept,millis,bisection_warning");
  for (const auto& r : trace.iterations) {
    out << r.iteration << ',' << r.alpha << ',' << r.ess << ',' << r.resampled << ',' << r.birth_accept_rate << ','
        << r.death_accept_rate << ',' << r.move_accept_rate << ',' << r.millis << ',' << r.bisection_warning << '\n';
  }
  return out.str();
}

std::string exp1_csv(const std::vector<Exp1GroupSummary>& groups, std::string_view hash) {
  auto out = csv_stream();
  out << csv_header(hash, "group,n_dipoles,correlated,runs,delta_d_mean,delta_d_std,delta_c_runs,delta_c_mean_mm,delta_c_std_mm");
  for (const auto& g : groups) {
    out << g.group.label << ',' << g.group.n_dipoles << ',' << g.group.correlated << ',' << g.runs << ','
        << g.mean_delta_d << ',' << g.std_delta_d << ',' << g.delta_c_count << ',' << 1e3 * g.mean_delta_c << ','
        << 1e3 * g.std_delta_c << '\n';
  }
  return out.str();
}

std::string exp1_strengths_csv(const std::vector<Exp1GroupSummary>& groups, std::string_view hash) {
  auto out = csv_stream();
  out << csv_header(hash, "group,dipole,t,true_strength,estimated_strength");
  for (const auto& g : groups) {
    for (Eigen::Index k = 0; k < g.mean_true_strength.rows(); ++k) {
      for (Eigen::Index t = 0; t < g.mean_true_strength.cols(); ++t) {
        out << g.group.label << ',' << k << ',' << t << ',' << g.mean_true_strength(k, t) << ','
            << g.mean_estimated_strength(k, t) << '\n';
      }
    }
  }
  return out.str();
}

std::string exp2_csv(const IntensityStdReport& report, const SourceGrid& grid, std::string_view hash) {
  auto out = csv_stream();
  out << csv_header(hash, "grid_index,x,y,z,std_full,std_semianalytic");
  for (std::size_t c = 0; c < report.std_full.size(); ++c) {
    const Vec3& z = grid.points.at(c);
    out << c << ',' << z.x() << ',' << z.y() << ',' << z.z() << ',' << report.std_full[c] << ','
        << report.std_semi[c] << '\n';
  }
  return out.str();
}

std::string exp2_verdict(const IntensityStdReport& report) {
  std::ostringstream out;
  out << (report.passes ? "PASS" : "FAIL") << ": semi-analytic std <= full std on " << std::setprecision(4)
      << 100.0 * report.fraction_semi_not_worse << "% of " << report.above_threshold.size()
      << " grid points with std > " << report.threshold << " (need >= 80%)";
  return out.str();
}

std::string exp3_csv(const std::vector<Exp3Row>& rows, std::string_view hash) {
  auto out = csv_stream();
  out << csv_header(hash, "window_length,seconds,iterations,d_hat");
  for (const auto& r : rows) out << r.length << ',' << r.seconds << ',' << r.iterations << ',' << r.d_hat << '\n';
  return out.str();
}

}  // namespace sasmc::io
