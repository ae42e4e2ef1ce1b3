#include "sasmc/dipole_config.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace sasmc {

DipoleConfig::DipoleConfig(std::initializer_list<GridIndex> indices)
    : DipoleConfig(std::vector<GridIndex>(indices)) {}

DipoleConfig::DipoleConfig(std::vector<GridIndex> indices) : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end()) {
    throw std::invalid_argument("DipoleConfig: duplicate grid index");
  }
  if (!indices_.empty() && indices_.front() < 0) {
    throw std::invalid_argument("DipoleConfig: negative grid index");
  }
}

bool DipoleConfig::contains(GridIndex c) const noexcept {
  return std::binary_search(indices_.begin(), indices_.end(), c);
}

DipoleConfig DipoleConfig::with(GridIndex c) const {
  if (c < 0 || contains(c)) {
    throw std::invalid_argument("DipoleConfig::with: index already occupied");
  }
  DipoleConfig out;
  out.indices_.reserve(indices_.size() + 1);
  auto pos = std::lower_bound(indices_.begin(), indices_.end(), c);
  out.indices_.assign(indices_.begin(), pos);
  out.indices_.push_back(c);
  out.indices_.insert(out.indices_.end(), pos, indices_.end());
  return out;
}

DipoleConfig DipoleConfig::without(GridIndex c) const {
  auto pos = std::lower_bound(indices_.begin(), indices_.end(), c);
  if (pos == indices_.end() || *pos != c) {
    throw std::invalid_argument("DipoleConfig::without: index not present");
  }
  DipoleConfig out;
  out.indices_.reserve(indices_.size() - 1);
  out.indices_.assign(indices_.begin(), pos);
  out.indices_.insert(out.indices_.end(), pos + 1, indices_.end());
  return out;
}

DipoleConfig DipoleConfig::moved(GridIndex from, GridIndex to) const {
  if (from == to) {
    if (!contains(from)) throw std::invalid_argument("DipoleConfig::moved: index not present");
    return *this;
  }
  return without(from).with(to);
}

void DipoleConfig::validate(std::size_t grid_size, std::size_t d_max) const {
  if (indices_.size() > d_max) {
    throw std::invalid_argument("DipoleConfig: dipole count exceeds d_max");
  }
  if (!indices_.empty() && static_cast<std::size_t>(indices_.back()) >= grid_size) {
    throw std::invalid_argument("DipoleConfig: grid index out of range");
  }
}

std::string DipoleConfig::to_string() const {
  std::ostringstream os;
  os << '{';
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    if (k) os << ',';
    os << indices_[k];
  }
  os << '}';
  return os.str();
}

}  // namespace sasmc
