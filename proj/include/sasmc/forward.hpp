#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sasmc/dipole_config.hpp"

namespace sasmc {

using Vec3 = Eigen::Vector3d;

// mu_0 / 4 pi in SI units.
inline constexpr double kMu0Over4Pi = 1e-7;
// Physical moment (A m) of one model moment unit; sigma_q is expressed in
// this unit so that a simulated "strength 1" dipole has sigma_q = 1.
inline constexpr double kMomentUnit = 1e-8;

struct SourceGrid {
  std::vector<Vec3> points;  // meters
  double spacing = 0.01;     // lattice pitch, informational

  std::size_t size() const noexcept { return points.size(); }
};

// Radial magnetometers: each sensor reads B . position / |position|.
struct SensorArray {
  std::vector<Vec3> positions;  // meters

  std::size_t size() const noexcept { return positions.size(); }
};

struct Geometry {
  SourceGrid grid;
  SensorArray sensors;
};

// Radial component of the free-space field of a current dipole, in tesla.
// Outside a spherically symmetric conductor this equals the full radial field.
// Throws DomainError when the sensor coincides with the source or sits at the
// origin.
double unit_dipole_field(const Vec3& source, const Vec3& moment, const Vec3& sensor);

/// Precomputed lead field: one N_s x 3 block per grid point, stored side by
/// side as an N_s x 3 N_C matrix. Immutable after construction.
class LeadField {
public:
  LeadField(const SourceGrid& grid, const SensorArray& sensors, double moment_unit = kMomentUnit);
  // Wraps an explicit N_s x 3 N_C matrix (used for synthetic problems).
  explicit LeadField(Eigen::MatrixXd blocks);

  Eigen::Index sensor_count() const noexcept { return blocks_.rows(); }
  std::size_t grid_size() const noexcept { return static_cast<std::size_t>(blocks_.cols() / 3); }

  auto block(GridIndex c) const { return blocks_.middleCols(3 * static_cast<Eigen::Index>(c), 3); }
  const Eigen::MatrixXd& matrix() const noexcept { return blocks_; }

private:
  Eigen::MatrixXd blocks_;
};

// G(r): the blocks of r's grid points concatenated in index order.
// An empty configuration yields an N_s x 0 matrix.
Eigen::MatrixXd assemble_lead_field(const LeadField& lead_field, const DipoleConfig& r);
// Same, with the blocks in the caller's order (no sorting).
Eigen::MatrixXd assemble_lead_field(const LeadField& lead_field, std::span<const GridIndex> indices);

// 1 cm cubic lattice inside an 8 cm sphere; 60 radial sensors on an 11 cm
// sphere placed on a Fibonacci lattice whose azimuthal phase depends on seed.
Geometry build_default_geometry(std::uint64_t seed);

// Checks the grid/sensor invariants; throws ConfigError on violation.
void validate_geometry(const Geometry& geometry);

}  // namespace sasmc
