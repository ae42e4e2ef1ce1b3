#include "sasmc/forward.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <tuple>

#include "sasmc/errors.hpp"

namespace sasmc {

double unit_dipole_field(const Vec3& source, const Vec3& moment, const Vec3& sensor) {
  const double sensor_norm = sensor.norm();
  const Vec3 offset = sensor - source;
  const double distance = offset.norm();
  if (sensor_norm == 0.0) throw DomainError("unit_dipole_field: sensor at origin");
  if (distance == 0.0) throw DomainError("unit_dipole_field: sensor coincides with source");
  const Vec3 radial = sensor / sensor_norm;
  return kMu0Over4Pi * moment.cross(offset).dot(radial) / (distance * distance * distance);
}

LeadField::LeadField(const SourceGrid& grid, const SensorArray& sensors, double moment_unit)
    : blocks_(static_cast<Eigen::Index>(sensors.size()), 3 * static_cast<Eigen::Index>(grid.size())) {
  const Eigen::Matrix3d unit = moment_unit * Eigen::Matrix3d::Identity();
  for (std::size_t c = 0; c < grid.size(); ++c) {
    for (std::size_t s = 0; s < sensors.size(); ++s) {
      for (int axis = 0; axis < 3; ++axis) {
        blocks_(static_cast<Eigen::Index>(s), 3 * static_cast<Eigen::Index>(c) + axis) =
            unit_dipole_field(grid.points[c], unit.col(axis), sensors.positions[s]);
      }
    }
  }
}

LeadField::LeadField(Eigen::MatrixXd blocks) : blocks_(std::move(blocks)) {
  if (blocks_.cols() % 3 != 0) {
    throw std::invalid_argument("LeadField: column count must be a multiple of 3");
  }
  if (!blocks_.allFinite()) throw std::invalid_argument("LeadField: non-finite entry");
}

Eigen::MatrixXd assemble_lead_field(const LeadField& lead_field, std::span<const GridIndex> indices) {
  Eigen::MatrixXd g(lead_field.sensor_count(), 3 * static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    g.middleCols(3 * static_cast<Eigen::Index>(k), 3) = lead_field.block(indices[k]);
  }
  return g;
}

Eigen::MatrixXd assemble_lead_field(const LeadField& lead_field, const DipoleConfig& r) {
  return assemble_lead_field(lead_field, r.indices());
}

Geometry build_default_geometry(std::uint64_t seed) {
  constexpr double spacing = 0.01;
  constexpr int half_extent = 8;  // lattice units
  constexpr double sensor_radius = 0.11;
  constexpr int sensor_count = 60;

  Geometry geometry;
  geometry.grid.spacing = spacing;
  for (int i = -half_extent; i <= half_extent; ++i) {
    for (int j = -half_extent; j <= half_extent; ++j) {
      for (int k = -half_extent; k <= half_extent; ++k) {
        if (i * i + j * j + k * k < half_extent * half_extent) {
          geometry.grid.points.emplace_back(i * spacing, j * spacing, k * spacing);
        }
      }
    }
  }

  std::mt19937_64 engine(seed);
  const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(engine);
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int s = 0; s < sensor_count; ++s) {
    const double z = 1.0 - (2.0 * s + 1.0) / sensor_count;
    const double rho = std::sqrt(1.0 - z * z);
    const double phi = phase + golden_angle * s;
    geometry.sensors.positions.emplace_back(sensor_radius * rho * std::cos(phi),
                                            sensor_radius * rho * std::sin(phi), sensor_radius * z);
  }
  return geometry;
}

void validate_geometry(const Geometry& geometry) {
  if (geometry.grid.size() == 0) throw ConfigError("geometry: empty source grid");
  if (geometry.sensors.size() == 0) throw ConfigError("geometry: no sensors");
  double max_grid_norm = 0.0;
  std::set<std::tuple<double, double, double>> seen;
  for (const auto& p : geometry.grid.points) {
    if (!p.allFinite()) throw ConfigError("geometry: non-finite grid point");
    if (!seen.emplace(p.x(), p.y(), p.z()).second) throw ConfigError("geometry: duplicate grid point");
    max_grid_norm = std::max(max_grid_norm, p.norm());
  }
  for (const auto& s : geometry.sensors.positions) {
    if (!s.allFinite()) throw ConfigError("geometry: non-finite sensor position");
    if (s.norm() <= max_grid_norm) {
      throw ConfigError("geometry: every sensor must lie outside the source grid");
    }
  }
}

}  // namespace sasmc
