#pragma once

#include <compare>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace sasmc {

using GridIndex = std::int32_t;

/// The non-linear unknown of the multi-dipole model: how many dipoles there
/// are and which grid points they occupy.
///
/// Indices are kept sorted ascending and distinct, so two configurations
/// describing the same set of sources compare equal.
class DipoleConfig {
public:
  DipoleConfig() = default;
  DipoleConfig(std::initializer_list<GridIndex> indices);
  explicit DipoleConfig(std::vector<GridIndex> indices);

  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  std::span<const GridIndex> indices() const noexcept { return indices_; }
  GridIndex operator[](std::size_t k) const { return indices_[k]; }
  auto begin() const noexcept { return indices_.begin(); }
  auto end() const noexcept { return indices_.end(); }

  bool contains(GridIndex c) const noexcept;

  // Returns a copy with `c` added; throws if already present.
  DipoleConfig with(GridIndex c) const;
  // Returns a copy with `c` removed; throws if absent.
  DipoleConfig without(GridIndex c) const;
  // Returns a copy where `from` is replaced by `to`.
  DipoleConfig moved(GridIndex from, GridIndex to) const;

  // Throws std::invalid_argument unless every index lies in [0, grid_size)
  // and the dipole count does not exceed d_max.
  void validate(std::size_t grid_size, std::size_t d_max) const;

  std::string to_string() const;

  friend auto operator<=>(const DipoleConfig&, const DipoleConfig&) = default;
  friend bool operator==(const DipoleConfig&, const DipoleConfig&) = default;

private:
  std::vector<GridIndex> indices_;
};

}  // namespace sasmc
