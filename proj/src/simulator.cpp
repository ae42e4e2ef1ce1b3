#include "sasmc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include "sasmc/errors.hpp"
#include "sasmc/rng.hpp"

namespace sasmc {
namespace {

constexpr int kMaxPlacementAttempts = 100000;

}  // namespace

void ScenarioSpec::validate() const {
  if (n_dipoles < 2 || n_dipoles > 4) throw ConfigError("scenario: n_dipoles must lie in [2, 4]");
  if (n_time < 1) throw ConfigError("scenario: n_time must be positive");
  if (noise_std && !(*noise_std >= 0.0)) throw ConfigError("scenario: noise_std must be >= 0");
  if (!(noise_fraction >= 0.0)) throw ConfigError("scenario: noise_fraction must be >= 0");
  if (!(min_separation >= 0.0)) throw ConfigError("scenario: min_separation must be >= 0");
  if (!peak_strength.empty()) {
    if (peak_strength.size() != static_cast<std::size_t>(n_dipoles)) {
      throw ConfigError("scenario: peak_strength needs one entry per dipole");
    }
    for (double s : peak_strength) {
      if (!(s > 0.0)) throw ConfigError("scenario: peak_strength entries must be positive");
    }
  }
}

Eigen::VectorXd GroundTruth::moments(Eigen::Index t) const {
  Eigen::VectorXd q(3 * strengths.rows());
  for (Eigen::Index k = 0; k < strengths.rows(); ++k) {
    q.segment<3>(3 * k) = strengths(k, t) * orientations[static_cast<std::size_t>(k)];
  }
  return q;
}

Eigen::VectorXd raised_cosine_bump(int n_time, int start, int length) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n_time);
  for (int t = std::max(start, 0); t < std::min(start + length, n_time); ++t) {
    const double phase = 2.0 * std::numbers::pi * (t - start + 1) / (length + 1);
    b(t) = 0.5 * (1.0 - std::cos(phase));
  }
  const double peak = b.maxCoeff();
  if (peak > 0.0) b /= peak;
  return b;
}

Eigen::MatrixXd time_courses(int n_dipoles, int n_time, bool correlated,
                             std::span<const double> peak_strength) {
  Eigen::MatrixXd s(n_dipoles, n_time);
  const int segment = std::max(1, n_time / n_dipoles);
  for (int k = 0; k < n_dipoles; ++k) {
    const double peak = peak_strength.empty() ? 1.0 : peak_strength[static_cast<std::size_t>(k)];
    Eigen::VectorXd bump;
    if (correlated) {
      bump = raised_cosine_bump(n_time, 0, n_time);
    } else {
      // The last segment absorbs the remainder of n_time / n_dipoles.
      const int start = k * segment;
      const int length = (k + 1 == n_dipoles) ? n_time - start : segment;
      bump = raised_cosine_bump(n_time, start, length);
    }
    s.row(k) = peak * bump.transpose();
  }
  return s;
}

TimeSeriesData synthesize(const LeadField& lead_field, const DipoleConfig& config,
                          const std::vector<Vec3>& orientations, const Eigen::MatrixXd& strengths) {
  const Eigen::MatrixXd g = assemble_lead_field(lead_field, config);
  Eigen::MatrixXd q(g.cols(), strengths.cols());
  for (Eigen::Index k = 0; k < strengths.rows(); ++k) {
    q.middleRows<3>(3 * k) = orientations[static_cast<std::size_t>(k)] * strengths.row(k);
  }
  return g * q;
}

GroundTruth generate(const ScenarioSpec& spec, const SourceGrid& grid, const LeadField& lead_field) {
  spec.validate();
  if (lead_field.grid_size() != grid.size()) {
    throw ConfigError("generate: lead field and grid disagree on size");
  }
  const auto n = static_cast<std::size_t>(spec.n_dipoles);
  if (grid.size() < n) throw ConfigError("generate: grid smaller than the dipole count");
  Rng rng(stream_seed(spec.seed, 0, 0, 0x5ce7a210));

  std::vector<GridIndex> locations;
  const double sep2 = spec.min_separation * spec.min_separation * (1.0 - 1e-9);
  int attempts = 0;
  for (;; ++attempts) {
    if (attempts >= kMaxPlacementAttempts) {
      throw std::runtime_error("generate: could not place dipoles with the requested separation");
    }
    locations.clear();
    bool ok = true;
    while (locations.size() < n && ok) {
      const auto c = static_cast<GridIndex>(
          std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(grid.size())), grid.size() - 1));
      for (GridIndex other : locations) {
        const double dist2 = (grid.points[static_cast<std::size_t>(c)] -
                              grid.points[static_cast<std::size_t>(other)]).squaredNorm();
        if (other == c || dist2 < sep2) ok = false;
      }
      locations.push_back(c);
    }
    if (ok) break;
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vec3> orientations(n);
  for (auto& o : orientations) {
    do {
      o = Vec3(normal(rng), normal(rng), normal(rng));
    } while (o.norm() < 1e-12);
    o.normalize();
  }
  const Eigen::MatrixXd courses = time_courses(spec.n_dipoles, spec.n_time, spec.correlated, spec.peak_strength);

  // Align orientations and courses with the sorted configuration.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return locations[a] < locations[b]; });

  GroundTruth truth;
  truth.config = DipoleConfig(locations);
  truth.strengths.resize(static_cast<Eigen::Index>(n), spec.n_time);
  for (std::size_t k = 0; k < n; ++k) {
    truth.orientations.push_back(orientations[order[k]]);
    truth.strengths.row(static_cast<Eigen::Index>(k)) = courses.row(static_cast<Eigen::Index>(order[k]));
  }
  truth.clean = synthesize(lead_field, truth.config, truth.orientations, truth.strengths);
  truth.noise_std = spec.noise_std ? *spec.noise_std : spec.noise_fraction * truth.clean.cwiseAbs().maxCoeff();
  truth.noisy = truth.clean;
  if (truth.noise_std > 0.0) {
    for (Eigen::Index j = 0; j < truth.noisy.cols(); ++j) {
      for (Eigen::Index i = 0; i < truth.noisy.rows(); ++i) truth.noisy(i, j) += truth.noise_std * normal(rng);
    }
  }
  return truth;
}

std::vector<TimeSeriesData> window(const TimeSeriesData& data, int center, std::span<const int> lengths) {
  std::vector<TimeSeriesData> out;
  for (int length : lengths) {
    const int start = center - length / 2;
    if (length < 1 || start < 0 || start + length > data.cols()) {
      throw std::out_of_range("window: requested window does not fit inside the data");
    }
    out.emplace_back(data.middleCols(start, length));
  }
  return out;
}

}  // namespace sasmc
