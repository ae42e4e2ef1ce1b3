#pragma once

// JSON and CSV persistence. Every JSON document carries "schema_version"; every CSV starts
// with "# schema_version" and "# config_hash" comment lines.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "sasmc/experiments.hpp"

namespace sasmc::io {

inline constexpr int kSchemaVersion = 1;

// 64-bit FNV-1a, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

std::string geometry_to_json(const Geometry& geometry);
Geometry geometry_from_json(std::string_view text);

// Required fields: n_dipoles, correlated, n_time. Others fall back to ScenarioSpec defaults.
std::string scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(std::string_view text);

struct Dataset {
  ScenarioSpec spec;
  std::uint64_t geometry_seed = 0;
  double noise_std = 0.0;
  TimeSeriesData data;  // N_s x N_t
};

std::string dataset_to_json(const Dataset& dataset);
Dataset dataset_from_json(std::string_view text);

std::string truth_to_json(const GroundTruth& truth);
GroundTruth truth_from_json(std::string_view text);

// Settings for a single analysis. Relative paths resolve against the config file's directory.
struct RunConfig {
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> truth;
  std::optional<std::filesystem::path> geometry;  // otherwise the dataset's geometry seed
  double sigma_q = 1.0;
  std::optional<double> sigma_e;  // otherwise the dataset's noise std
  double poisson_lambda = 0.25;
  std::size_t d_max = 10;
  SmcSettings smc;
  KernelSettings kernels;
  std::filesystem::path out = "out";

  void validate() const;
};

RunConfig run_config_from_json(std::string_view text, const std::filesystem::path& base_dir);
// Canonical form used for the config hash. The output directory and worker count are left
// out: neither changes the results.
std::string run_config_to_json(const RunConfig& config);

std::string summary_to_json(const PosteriorSummary& summary, const SourceGrid& grid, std::string_view hash);
std::string discrepancy_to_json(const Discrepancy& discrepancy, std::string_view hash);

std::string trace_csv(const RunTrace& trace, std::string_view hash);
std::string exp1_csv(const std::vector<Exp1GroupSummary>& groups, std::string_view hash);
std::string exp1_strengths_csv(const std::vector<Exp1GroupSummary>& groups, std::string_view hash);
std::string exp2_csv(const IntensityStdReport& report, const SourceGrid& grid, std::string_view hash);
std::string exp2_verdict(const IntensityStdReport& report);
std::string exp3_csv(const std::vector<Exp3Row>& rows, std::string_view hash);

}  // namespace sasmc::io
